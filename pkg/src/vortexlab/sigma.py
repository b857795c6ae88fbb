"""Divergence-free vector fields driving the common transport noise.

Each basis field is a constant 2-vector plus a sum of single-mode stream
functions psi = a cos(k.x + phase), giving sigma = (d2 psi, -d1 psi) =
a (-k2, k1) sin(k.x + phase).  Divergence-free holds identically by
construction, and the Jacobian is available in closed form for the
Stratonovich-to-Ito corrections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import grid_points


@dataclass(frozen=True)
class StreamMode:
    """One stream-function mode psi = amplitude * cos(k . x + phase)."""

    amplitude: float
    k: tuple[int, int]
    phase: float = 0.0


@dataclass(frozen=True)
class SigmaField:
    constant: tuple[float, float] = (0.0, 0.0)
    modes: tuple[StreamMode, ...] = ()

    @property
    def is_constant(self) -> bool:
        return len(self.modes) == 0

    def eval(self, x: np.ndarray) -> np.ndarray:
        """sigma at points x of shape (..., 2)."""
        x = np.asarray(x, dtype=float)
        out = np.broadcast_to(np.asarray(self.constant), x.shape).copy()
        for mode in self.modes:
            k1, k2 = mode.k
            s = np.sin(k1 * x[..., 0] + k2 * x[..., 1] + mode.phase)
            out[..., 0] += -mode.amplitude * k2 * s
            out[..., 1] += mode.amplitude * k1 * s
        return out

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """J[..., a, b] = d sigma_a / d x_b."""
        x = np.asarray(x, dtype=float)
        J = np.zeros(x.shape[:-1] + (2, 2))
        for mode in self.modes:
            k1, k2 = mode.k
            c = np.cos(k1 * x[..., 0] + k2 * x[..., 1] + mode.phase)
            J[..., 0, 0] += -mode.amplitude * k2 * k1 * c
            J[..., 0, 1] += -mode.amplitude * k2 * k2 * c
            J[..., 1, 0] += mode.amplitude * k1 * k1 * c
            J[..., 1, 1] += mode.amplitude * k1 * k2 * c
        return J

    def self_advection(self, x: np.ndarray) -> np.ndarray:
        """(sigma . grad) sigma, the particle-side Stratonovich correction."""
        s = self.eval(x)
        J = self.jacobian(x)
        return np.einsum("...ab,...b->...a", J, s)

    def eval_grid(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        X1, X2 = grid_points(n)
        pts = np.stack([X1, X2], axis=-1)
        s = self.eval(pts)
        return s[..., 0], s[..., 1]


def basis_is_constant(basis: list[SigmaField]) -> bool:
    return all(s.is_constant for s in basis)
