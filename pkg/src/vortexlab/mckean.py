"""Conditional McKean-Vlasov copies driven by a precomputed field trajectory.

Each copy Y_i follows

    dY = K*v_t(Y) dt + sqrt(2) dB_i + sum_k sigma_k(Y) o dW^k

where v is interpolated from stored SPDE snapshots: trigonometric (exact
mode synthesis) in space, linear in time.  The copies consume the same
common path that produced the trajectory, and are independent given it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, TimeRangeError
from .kernels import wrap
from .particles import _drift_tables


def extract_mode_square(coeff: np.ndarray, M: int) -> np.ndarray:
    """Centered (2M+1)^2 mode block [m1, m2] from an fft-layout array."""
    n = coeff.shape[0]
    if 2 * M >= n:
        raise ConfigError(f"synthesis cutoff {M} too large for grid {n}")
    ks = np.arange(-M, M + 1)
    return coeff[np.ix_(ks % n, ks % n)]


@dataclass
class FieldTrajectory:
    """Ordered field snapshots with space-spectral / time-linear interpolation."""

    times: np.ndarray  # (S,), strictly increasing
    coeffs: np.ndarray  # (S, n, n) fft-layout Fourier coefficients
    common_fingerprint: str | None = None

    @classmethod
    def from_snapshots(cls, snapshots, common_fingerprint=None) -> "FieldTrajectory":
        times = np.array([f.t for f in snapshots])
        if not np.all(np.diff(times) > 0):
            raise ConfigError("snapshot times must be strictly increasing")
        n = snapshots[0].n
        if any(f.n != n for f in snapshots):
            raise ConfigError("all snapshots must share one grid")
        return cls(times, np.stack([f.coeff for f in snapshots]), common_fingerprint)

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    def coeff_at(self, t: float) -> np.ndarray:
        tol = 1e-12
        if t < self.times[0] - tol or t > self.times[-1] + tol:
            raise TimeRangeError(f"t={t} outside trajectory span [{self.times[0]}, {self.times[-1]}]")
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        j = min(max(j, 0), len(self.times) - 2) if len(self.times) > 1 else 0
        if len(self.times) == 1 or abs(t - self.times[j]) <= tol:
            return self.coeffs[j]
        if abs(t - self.times[j + 1]) <= tol:
            return self.coeffs[j + 1]
        w = (t - self.times[j]) / (self.times[j + 1] - self.times[j])
        return (1.0 - w) * self.coeffs[j] + w * self.coeffs[j + 1]


def velocity_at(traj: FieldTrajectory, t: float, x: np.ndarray, cutoff: int | None = None) -> np.ndarray:
    """K*v at (t, x): exact mode synthesis at the points x of shape (..., 2)."""
    if cutoff is None:
        cutoff = max(traj.n // 3, 1)
    coeff = traj.coeff_at(t)
    vm = extract_mode_square(coeff, cutoff)
    ks, c1, c2 = _drift_tables(cutoff)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    pts = np.atleast_2d(x)
    E1 = np.exp(1j * np.outer(pts[:, 0], ks))
    E2 = np.exp(1j * np.outer(pts[:, 1], ks))
    u = np.empty((len(pts), 2))
    for a, c in ((0, c1), (1, c2)):
        T = E2 @ (c * vm).T
        u[:, a] = np.einsum("ia,ia->i", E1, T).real
    return u[0] if scalar else u


@dataclass
class McKeanConfig:
    synthesis_cutoff: int | None = None


def run_copies(
    traj: FieldTrajectory,
    paths,
    n_copies: int,
    basis,
    cfg: McKeanConfig | None = None,
    output_times=None,
):
    """Euler-Maruyama for the copies; same noise handling as the particles."""
    cfg = cfg or McKeanConfig()
    if paths.n_particles < n_copies:
        raise ConfigError(f"paths carry {paths.n_particles} individual streams < {n_copies} copies")
    if (
        traj.common_fingerprint is not None
        and traj.common_fingerprint != paths.common_fingerprint()
    ):
        raise ConfigError("copies must consume the common path that produced the trajectory")
    if output_times is None:
        output_times = [paths.time_grid[-1]]
    output_times = list(output_times)

    # copies start from the positions sampled into the path container by the caller
    raise_if = paths.time_grid[0]
    if abs(raise_if - traj.times[0]) > 1e-9:
        raise ConfigError("path grid must start at the trajectory's initial time")
    return _advance(traj, paths, n_copies, basis, cfg, output_times)


def _advance(traj, paths, n_copies, basis, cfg, output_times, x0=None):
    grid = paths.time_grid
    if x0 is None:
        raise ConfigError("initial copy positions required (pass via run_copies_from)")
    x = wrap(np.asarray(x0, dtype=float))
    out = []

    def visit(t, pos):
        for ot in output_times:
            if abs(t - ot) <= 1e-12:
                out.append((t, pos.copy()))

    visit(grid[0], x)
    for j in range(paths.n_steps):
        t0, t1 = grid[j], grid[j + 1]
        dt = t1 - t0
        disp = velocity_at(traj, t0, x, cfg.synthesis_cutoff) * dt
        disp += np.sqrt(2.0) * paths.individual[j, :n_copies]
        for sig, dw in zip(basis, paths.common[j]):
            disp += sig.eval(x) * dw + 0.5 * dt * sig.self_advection(x)
        x = wrap(x + disp)
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"NaN in McKean-Vlasov copies at t={t1}")
        visit(t1, x)
    return out


def run_copies_from(
    traj: FieldTrajectory,
    x0: np.ndarray,
    paths,
    basis,
    cfg: McKeanConfig | None = None,
    output_times=None,
):
    """Like run_copies but with explicit initial positions x0 of shape (R, 2)."""
    cfg = cfg or McKeanConfig()
    n_copies = len(x0)
    if paths.n_particles < n_copies:
        raise ConfigError(f"paths carry {paths.n_particles} individual streams < {n_copies} copies")
    if (
        traj.common_fingerprint is not None
        and traj.common_fingerprint != paths.common_fingerprint()
    ):
        raise ConfigError("copies must consume the common path that produced the trajectory")
    if output_times is None:
        output_times = [paths.time_grid[-1]]
    return _advance(traj, paths, n_copies, basis, cfg, list(output_times), x0=x0)
