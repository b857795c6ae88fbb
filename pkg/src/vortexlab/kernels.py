"""Green function and Biot-Savart kernel on the 2-torus [-pi, pi)^2.

The truncated series

    G(x)   = sum_{0 < |m| <= M} |m|^-2 exp(i m.x)
    K(x)   = sum_{0 < |m| <= M} i m_perp |m|^-2 exp(i m.x),   m_perp = (m2, -m1)

are summed in closed form over mode pairs {m, -m}, so both are exactly real.
Truncation keeps the Euclidean disc |m| <= M; this is the mode set under
which all the hand-derived reference values in the test suite were computed.

The regularized family G_eps agrees with G exactly for |x| >= eps and is
capped inside by a C^2 radial blend to a constant plateau, so the kernel and
its perpendicular gradient are continuous across |x| = eps to machine
precision and vanish smoothly at the origin.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import SingularityError

TWO_PI = 2.0 * np.pi


def wrap(x):
    """Reduce coordinates to the canonical representative in [-pi, pi)."""
    return np.mod(np.asarray(x, dtype=float) + np.pi, TWO_PI) - np.pi


def torus_distance(x, y):
    """Geodesic (flat) distance on the torus; at most pi*sqrt(2)."""
    d = wrap(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    return np.sqrt(np.sum(d * d, axis=-1))


@lru_cache(maxsize=64)
def half_modes(M: int):
    """Representatives of the mode pairs {m, -m} in the disc 0 < |m| <= M.

    Half plane convention: m1 > 0, or m1 == 0 and m2 > 0.
    """
    rng = np.arange(-M, M + 1)
    m1, m2 = np.meshgrid(rng, rng, indexing="ij")
    modes = np.stack([m1.ravel(), m2.ravel()], axis=1)
    norm2 = (modes**2).sum(axis=1)
    keep = (norm2 > 0) & (norm2 <= M * M)
    half = (modes[:, 0] > 0) | ((modes[:, 0] == 0) & (modes[:, 1] > 0))
    modes = modes[keep & half]
    # fixed deterministic order
    order = np.lexsort((modes[:, 1], modes[:, 0]))
    return np.ascontiguousarray(modes[order])


@lru_cache(maxsize=64)
def disc_modes(M: int):
    """All modes 0 < |m| <= M (both members of each pair), fixed order."""
    half = half_modes(M)
    return np.concatenate([half, -half], axis=0)


@dataclass(frozen=True)
class KernelSpec:
    """Truncation cutoff M and optional regularization radius eps."""

    M: int
    epsilon: float | None = None

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("mode cutoff M must be >= 1")
        if self.epsilon is not None:
            if not (0.0 < self.epsilon < 1.0):
                raise ValueError("epsilon must lie in (0, 1)")
            if self.epsilon < TWO_PI / self.M:
                warnings.warn(
                    f"epsilon={self.epsilon} below resolvable scale 2*pi/M={TWO_PI / self.M:.4g}",
                    stacklevel=2,
                )


def _green_raw(x, M: int):
    modes = half_modes(M)
    x = wrap(x)
    phase = x @ modes.T.astype(float)
    w = 2.0 / (modes**2).sum(axis=1).astype(float)
    return np.cos(phase) @ w


def _biot_savart_raw(x, M: int):
    modes = half_modes(M)
    x = wrap(x)
    phase = x @ modes.T.astype(float)
    w = 2.0 / (modes**2).sum(axis=1).astype(float)
    s = np.sin(phase) * w
    perp = np.stack([modes[:, 1], -modes[:, 0]], axis=1).astype(float)
    return -(s @ perp)


def _check_origin(x, spec: KernelSpec):
    if spec.epsilon is None:
        r = np.sqrt(np.sum(wrap(x) ** 2, axis=-1))
        if np.any(r == 0.0):
            raise SingularityError("kernel evaluated at the singular point x = 0 without regularization")


def green(x, spec: KernelSpec):
    """Truncated Green function; singular-point evaluation requires eps."""
    _check_origin(x, spec)
    return _green_raw(x, spec.M)


def biot_savart(x, spec: KernelSpec):
    """Truncated Biot-Savart kernel K = perp-gradient of G."""
    _check_origin(x, spec)
    return _biot_savart_raw(x, spec.M)


def _bump(s):
    """C^2 cutoff: 1 for s <= 1/2, 0 for s >= 1, quintic smoothstep between."""
    s = np.asarray(s, dtype=float)
    t = np.clip((s - 0.5) * 2.0, 0.0, 1.0)
    return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _bump_deriv(s):
    s = np.asarray(s, dtype=float)
    t = (s - 0.5) * 2.0
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    d = -2.0 * (30.0 * t * t * (1.0 - t) ** 2)
    return np.where(inside, d, 0.0)


@lru_cache(maxsize=64)
def _cap_value(M: int, epsilon: float) -> float:
    """Plateau value: angular mean of G on the circle of radius eps/2."""
    ang = (np.arange(16) + 0.5) * (TWO_PI / 16)
    pts = 0.5 * epsilon * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return float(np.mean(_green_raw(pts, M)))


def green_regularized(x, spec: KernelSpec):
    """G_eps: equals G for |x| >= eps, constant plateau near 0, C^2 blend.

    Total function; finite everywhere.
    """
    if spec.epsilon is None:
        raise ValueError("green_regularized requires a KernelSpec with epsilon")
    x = wrap(x)
    r = np.sqrt(np.sum(x * x, axis=-1))
    g = _green_raw(x, spec.M)
    chi = _bump(r / spec.epsilon)
    c = _cap_value(spec.M, spec.epsilon)
    return (1.0 - chi) * g + chi * c


def biot_savart_regularized(x, spec: KernelSpec):
    """Perp-gradient of G_eps, analytic: equals K for |x| >= eps, (0,0) at 0."""
    if spec.epsilon is None:
        raise ValueError("biot_savart_regularized requires a KernelSpec with epsilon")
    x = wrap(x)
    scalar = x.ndim == 1
    x2 = np.atleast_2d(x)
    r = np.sqrt(np.sum(x2 * x2, axis=-1))
    k = _biot_savart_raw(x2, spec.M)
    eps = spec.epsilon
    chi = _bump(r / eps)
    out = (1.0 - chi)[:, None] * k
    inner = (r < eps) & (r > 0.0)
    if np.any(inner):
        g = _green_raw(x2[inner], spec.M)
        c = _cap_value(spec.M, eps)
        dchi = _bump_deriv(r[inner] / eps) / eps
        u = x2[inner] / r[inner, None]
        u_perp = np.stack([u[:, 1], -u[:, 0]], axis=1)
        out[inner] += (dchi * (c - g))[:, None] * u_perp
    return out[0] if scalar else out
