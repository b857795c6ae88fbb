import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vortexlab.sigma import SigmaField, StreamMode, basis_is_constant

CROSS = SigmaField(modes=(StreamMode(-1.0, (0, 1)), StreamMode(1.0, (1, 0))))  # (sin x2, sin x1)

points = st.tuples(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0)).map(np.array)
fields = st.builds(
    SigmaField,
    st.tuples(st.floats(-1, 1), st.floats(-1, 1)),
    st.lists(
        st.builds(
            StreamMode,
            st.floats(-1, 1),
            st.tuples(st.integers(-3, 3), st.integers(-3, 3)),
            st.floats(0, 6.28),
        ),
        max_size=3,
    ).map(tuple),
)


def test_cross_field_values():
    x = np.array([np.pi / 2, 0.0])
    assert np.allclose(CROSS.eval(x), [0.0, 1.0])
    assert np.allclose(CROSS.self_advection(x), [1.0, 0.0])


def test_constant_field():
    sig = SigmaField(constant=(0.7, -0.3))
    assert sig.is_constant
    x = np.random.default_rng(0).uniform(-3, 3, (5, 2))
    assert np.allclose(sig.eval(x), [0.7, -0.3])
    assert np.allclose(sig.jacobian(x), 0.0)
    assert np.allclose(sig.self_advection(x), 0.0)
    assert basis_is_constant([sig])
    assert not basis_is_constant([sig, CROSS])


@settings(deadline=None, max_examples=40)
@given(fields, points)
def test_jacobian_matches_finite_differences(sig, x):
    h = 1e-6
    J = sig.jacobian(x)
    for b, e in enumerate(np.eye(2)):
        fd = (sig.eval(x + h * e) - sig.eval(x - h * e)) / (2 * h)
        assert np.allclose(J[:, b], fd, atol=1e-5)


@settings(deadline=None, max_examples=40)
@given(fields, points)
def test_divergence_free(sig, x):
    J = sig.jacobian(x)
    assert abs(J[0, 0] + J[1, 1]) < 1e-12


def test_eval_grid_shape():
    s1, s2 = CROSS.eval_grid(16)
    assert s1.shape == s2.shape == (16, 16)
    from vortexlab.fields import grid_points

    X1, X2 = grid_points(16)
    assert np.allclose(s1, np.sin(X2))
    assert np.allclose(s2, np.sin(X1))
