import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vortexlab.errors import SingularityError
from vortexlab.kernels import (
    KernelSpec,
    _green_raw,
    biot_savart,
    biot_savart_regularized,
    green,
    green_regularized,
    half_modes,
    torus_distance,
    wrap,
)

coord = st.floats(-3.14, 3.14).filter(lambda v: abs(v) > 1e-6)
points = st.tuples(coord, coord).map(np.array)


def test_wrap_canonical_range():
    x = wrap(np.array([3 * np.pi, -3 * np.pi, 0.1, -np.pi]))
    assert np.all(x >= -np.pi) and np.all(x < np.pi)
    assert x[2] == pytest.approx(0.1)


def test_torus_distance_shortcut():
    # antipodal-ish points are close across the seam
    assert torus_distance(np.array([np.pi - 0.1, 0.0]), np.array([-np.pi + 0.1, 0.0])) == pytest.approx(0.2)
    assert torus_distance(np.array([0.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)


def test_half_modes_m1_covers_four_modes():
    m = half_modes(1)
    assert sorted(map(tuple, m)) == [(0, 1), (1, 0)]


def test_green_hand_values_m1():
    # G = 2 cos x1 + 2 cos x2 at M = 1
    assert _green_raw(np.zeros(2), 1) == pytest.approx(4.0)
    spec = KernelSpec(1)
    assert green(np.array([np.pi, np.pi]), spec) == pytest.approx(-4.0)
    assert green(np.array([np.pi / 2, np.pi / 2]), spec) == pytest.approx(0.0, abs=1e-12)


def test_biot_savart_closed_form_m1():
    # K = (-2 sin x2, 2 sin x1) at M = 1
    spec = KernelSpec(1)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-np.pi, np.pi, (20, 2))
    k = biot_savart(pts, spec)
    assert np.allclose(k[:, 0], -2 * np.sin(pts[:, 1]), atol=1e-12)
    assert np.allclose(k[:, 1], 2 * np.sin(pts[:, 0]), atol=1e-12)


@settings(deadline=None, max_examples=30)
@given(points)
def test_kernel_symmetries(x):
    spec = KernelSpec(6)
    assert green(x, spec) == pytest.approx(green(-x, spec), abs=1e-10)
    assert np.allclose(biot_savart(x, spec), -biot_savart(-x, spec), atol=1e-10)


def test_singularity_guard():
    spec = KernelSpec(4)
    with pytest.raises(SingularityError):
        green(np.zeros(2), spec)
    with pytest.raises(SingularityError):
        biot_savart(np.array([[0.1, 0.2], [0.0, 0.0]]), spec)


def test_perp_gradient_and_divergence_finite_difference():
    spec = KernelSpec(12)
    rng = np.random.default_rng(3)
    h = 1e-5
    e1, e2 = np.array([h, 0.0]), np.array([0.0, h])
    for _ in range(20):
        x = rng.uniform(0.5, 2.5, 2)
        k = biot_savart(x, spec)
        d2g = (green(x + e2, spec) - green(x - e2, spec)) / (2 * h)
        d1g = (green(x + e1, spec) - green(x - e1, spec)) / (2 * h)
        assert k[0] == pytest.approx(d2g, abs=1e-5)
        assert k[1] == pytest.approx(-d1g, abs=1e-5)
        div = (
            (biot_savart(x + e1, spec)[0] - biot_savart(x - e1, spec)[0])
            + (biot_savart(x + e2, spec)[1] - biot_savart(x - e2, spec)[1])
        ) / (2 * h)
        assert abs(div) < 1e-5


def test_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(0)
    with pytest.raises(ValueError):
        KernelSpec(4, epsilon=1.5)
    with pytest.warns(UserWarning, match="resolvable"):
        KernelSpec(4, epsilon=0.01)


def test_regularized_matches_outside_epsilon():
    spec = KernelSpec(8, epsilon=0.4)
    rng = np.random.default_rng(5)
    pts = rng.uniform(-np.pi, np.pi, (200, 2))
    r = np.sqrt((pts**2).sum(axis=1))
    outside = pts[r >= 0.4]
    assert np.array_equal(green_regularized(outside, spec), green(outside, spec))
    assert np.array_equal(biot_savart_regularized(outside, spec), biot_savart(outside, spec))


def test_regularized_continuity_across_epsilon():
    spec = KernelSpec(16, epsilon=0.3)
    ths = np.linspace(0.0, 2 * np.pi, 17)[:-1]
    u = np.stack([np.cos(ths), np.sin(ths)], axis=1)
    for radius_in, radius_out in [(0.3 * (1 - 1e-10), 0.3 * (1 + 1e-10))]:
        gi = green_regularized(radius_in * u, spec)
        go = green_regularized(radius_out * u, spec)
        assert np.max(np.abs(gi - go)) < 1e-6
        ki = biot_savart_regularized(radius_in * u, spec)
        ko = biot_savart_regularized(radius_out * u, spec)
        kmag = 1.0 + np.max(np.abs(ko))
        assert np.max(np.abs(ki - ko)) < 1e-6 * kmag


def test_regularized_origin_and_plateau():
    spec = KernelSpec(8, epsilon=0.5)
    assert np.allclose(biot_savart_regularized(np.zeros(2), spec), 0.0)
    # plateau: constant on r <= eps/2
    a = green_regularized(np.array([0.05, 0.0]), spec)
    b = green_regularized(np.array([0.0, 0.2]), spec)
    assert a == pytest.approx(b, abs=1e-12)
    assert np.isfinite(a)


def test_regularized_gradient_consistency():
    # K_eps is the perpendicular gradient of G_eps inside the blend region too
    spec = KernelSpec(8, epsilon=0.8)
    rng = np.random.default_rng(11)
    h = 1e-6
    e1, e2 = np.array([h, 0.0]), np.array([0.0, h])
    for _ in range(20):
        r = rng.uniform(0.3, 0.79)
        th = rng.uniform(0, 2 * np.pi)
        x = r * np.array([np.cos(th), np.sin(th)])
        k = biot_savart_regularized(x, spec)
        d2 = (green_regularized(x + e2, spec) - green_regularized(x - e2, spec)) / (2 * h)
        d1 = (green_regularized(x + e1, spec) - green_regularized(x - e1, spec)) / (2 * h)
        assert k[0] == pytest.approx(d2, abs=5e-5)
        assert k[1] == pytest.approx(-d1, abs=5e-5)


def test_regularized_requires_epsilon():
    with pytest.raises(ValueError):
        green_regularized(np.array([0.1, 0.1]), KernelSpec(4))
    with pytest.raises(ValueError):
        biot_savart_regularized(np.array([0.1, 0.1]), KernelSpec(4))
