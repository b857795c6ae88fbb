"""Comparison functionals between particle ensembles and vorticity fields.

The particle side enters through the weighted empirical measure
mu_N = (1/N) sum_i xi_i delta_{X_i}; the field side through its Fourier
coefficients.  The bridge is the shared Fourier convention: mu_N's modes
mu(m) = (1/N) sum xi_j exp(-i m.X_j) are compared with (2 pi)^2 v_hat(m),
since the field coefficients live under the normalized measure dx/(2 pi)^2.

Distances offered: negative-order Sobolev on exact modes (bias-free, the
primary metric), grid total variation, relative entropy, and Fisher
information on kernel-density surrogates (secondary, bias acknowledged).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, GridMismatchError
from .fields import SpectralField, mode_grids, transform

TWO_PI = 2.0 * np.pi


@lru_cache(maxsize=32)
def _disc_weights(M: int, s: float):
    """(1+|m|^2)^(-s) on the centered square, zero outside the disc |m| <= M."""
    ks = np.arange(-M, M + 1)
    m1, m2 = np.meshgrid(ks, ks, indexing="ij")
    norm2 = (m1**2 + m2**2).astype(float)
    w = (1.0 + norm2) ** (-s)
    return np.where(norm2 <= M * M, w, 0.0)


def empirical_fourier(positions: np.ndarray, intensities: np.ndarray, M: int) -> np.ndarray:
    """mu(m) = (1/N) sum_j xi_j exp(-i m.X_j), centered (2M+1)^2 array."""
    ks = np.arange(-M, M + 1)
    E1 = np.exp(-1j * np.outer(positions[:, 0], ks))
    E2 = np.exp(-1j * np.outer(positions[:, 1], ks))
    return (E1 * intensities[:, None]).T @ E2 / len(intensities)


def field_mode_square(v: SpectralField, M: int) -> np.ndarray:
    """(2 pi)^2 v_hat(m) on the centered square: the field in measure units."""
    n = v.n
    if 2 * M >= n:
        raise ConfigError(f"cutoff {M} exceeds the modes resolved on an {n}^2 grid")
    ks = np.arange(-M, M + 1)
    return TWO_PI**2 * v.coeff[np.ix_(ks % n, ks % n)]


def h_minus_s_distance(
    mu: np.ndarray,
    v: SpectralField | np.ndarray,
    s: float = 2.75,
    expect_mass: float | None = None,
) -> float:
    """H^{-s} distance between an empirical mode array and a field.

    sqrt( sum_{|m| <= M} (1 + |m|^2)^{-s} |mu(m) - (2 pi)^2 v_hat(m)|^2 ),
    the cutoff M being fixed by the shape of ``mu``.  ``expect_mass`` guards
    against convention mismatches: the field's constant mode (its total
    measure) must reproduce it.
    """
    mu = np.asarray(mu)
    if mu.ndim != 2 or mu.shape[0] != mu.shape[1] or mu.shape[0] % 2 == 0:
        raise ConfigError(f"mode array must be (2M+1)^2 centered, got {mu.shape}")
    M = mu.shape[0] // 2
    fm = field_mode_square(v, M) if isinstance(v, SpectralField) else np.asarray(v)
    if fm.shape != mu.shape:
        raise GridMismatchError(f"mode arrays differ in cutoff: {mu.shape} vs {fm.shape}")
    if expect_mass is not None and abs(fm[M, M].real - expect_mass) > 1e-8 * (1 + abs(expect_mass)):
        raise ConfigError(
            f"field constant mode {fm[M, M].real!r} does not match the expected "
            f"total mass {expect_mass!r}: Fourier convention mismatch"
        )
    w = _disc_weights(M, float(s))
    return float(np.sqrt(np.sum(w * np.abs(mu - fm) ** 2)))


@dataclass
class GriddedDensity:
    """Nonnegative cell values on a uniform grid with explicit cell area."""

    values: np.ndarray
    cell_area: float

    @classmethod
    def from_torus_grid(cls, values: np.ndarray) -> "GriddedDensity":
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        return cls(values, (TWO_PI / n) ** 2)

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def check_normalized(self, tol: float = 1e-10) -> None:
        if abs(self.mass - 1.0) > tol:
            raise ConfigError(f"density mass {self.mass!r} not 1 within {tol}")


def kde_density(
    positions: np.ndarray,
    intensities: np.ndarray,
    bandwidth: float,
    n: int,
) -> GriddedDensity:
    """Periodic Gaussian kernel estimate of the weighted position marginal.

    Cloud-in-cell deposit followed by spectral smoothing with the wrapped
    Gaussian multiplier exp(-|m|^2 h^2 / 2).  Weights xi_i / sum xi_i, so the
    result integrates to 1.
    """
    if bandwidth <= 0:
        raise ConfigError("bandwidth must be positive")
    w = np.asarray(intensities, dtype=float)
    w = w / w.sum()
    dx = TWO_PI / n
    # bilinear (cloud-in-cell) deposit onto the periodic grid
    f = (np.asarray(positions) + np.pi) / dx
    i0 = np.floor(f).astype(int)
    frac = f - i0
    grid = np.zeros((n, n))
    for a in (0, 1):
        for b in (0, 1):
            wt = w * (frac[:, 0] if a else 1 - frac[:, 0]) * (frac[:, 1] if b else 1 - frac[:, 1])
            np.add.at(grid, ((i0[:, 0] + a) % n, (i0[:, 1] + b) % n), wt)
    grid /= dx * dx
    m1, m2 = mode_grids(n)
    smooth = np.exp(-(m1**2 + m2**2) * bandwidth**2 / 2.0)
    field = transform(grid)
    field.coeff *= smooth
    vals = np.maximum(field.values(), 0.0)
    return GriddedDensity.from_torus_grid(vals)


def smooth_density(d: GriddedDensity, bandwidth: float) -> GriddedDensity:
    """Apply the same wrapped-Gaussian smoothing the KDE uses to a density.

    Comparing a KDE against the identically smoothed target keeps the
    smoothing bias common to both sides, so the difference is sampling error.
    """
    n = d.values.shape[0]
    m1, m2 = mode_grids(n)
    field = transform(d.values)
    field.coeff *= np.exp(-(m1**2 + m2**2) * bandwidth**2 / 2.0)
    return GriddedDensity(np.maximum(field.values(), 0.0), d.cell_area)


def density_from_field(v: SpectralField, normalize: bool = True) -> GriddedDensity:
    """Grid density surrogate of a field, clipped at 0, optionally normalized."""
    vals = np.maximum(v.values(), 0.0)
    d = GriddedDensity.from_torus_grid(vals)
    if normalize:
        if d.mass <= 0:
            raise ConfigError("field has no positive part to normalize")
        d = GriddedDensity(d.values / d.mass, d.cell_area)
    return d


def relative_entropy(p: GriddedDensity, q: GriddedDensity) -> float:
    """H(p|q) = sum p log(p/q) * area, with 0 log 0 = 0; +inf if p escapes q."""
    if p.values.shape != q.values.shape:
        raise GridMismatchError("relative entropy requires densities on the same grid")
    pv, qv = p.values, q.values
    pos = pv > 0
    if np.any(pos & (qv <= 0)):
        return math.inf
    val = float(np.sum(pv[pos] * np.log(pv[pos] / qv[pos])) * p.cell_area)
    return max(val, 0.0)


def fisher_information(p: GriddedDensity) -> float:
    """I(p) = sum |grad p|^2 / p * area, central differences, 0/0 -> 0."""
    v = p.values
    n = v.shape[0]
    dx = math.sqrt(p.cell_area)
    g1 = (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) / (2 * dx)
    g2 = (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2 * dx)
    num = g1**2 + g2**2
    mask = v >= 1e-14
    return float(np.sum(num[mask] / v[mask]) * p.cell_area)


def tv_distance(p: GriddedDensity, q: GriddedDensity) -> float:
    if p.values.shape != q.values.shape:
        raise GridMismatchError("TV distance requires densities on the same grid")
    return float(0.5 * np.sum(np.abs(p.values - q.values)) * p.cell_area)


def ckp_holds(tv: float, entropy: float, slack: float = 1e-12) -> bool:
    """Csiszar-Kullback-Pinsker: tv <= sqrt(2 H) within the stated slack."""
    if math.isinf(entropy):
        return True
    return tv <= math.sqrt(2.0 * entropy) + slack


@dataclass
class ReplicaMetrics:
    """One replica's metrics at one output time."""

    t: float
    h_minus_s: float
    tv: float
    rel_entropy: float
    fisher: float
    fingerprint: str = ""


_FIELDS = ("h_minus_s", "tv", "rel_entropy", "fisher")


@dataclass
class MetricReport:
    """Replica-averaged metrics at one time, with standard errors."""

    t: float
    n_particles: int
    n_replicas: int
    h_minus_s: float
    tv: float
    rel_entropy: float
    fisher: float
    ckp_ok: bool
    h_minus_s_stderr: float = 0.0
    tv_stderr: float = 0.0
    rel_entropy_stderr: float = 0.0
    fisher_stderr: float = 0.0

    CSV_HEADER = (
        "t,N,R,h_minus_s,tv,rel_entropy,fisher,ckp_ok,"
        "h_minus_s_stderr,tv_stderr,rel_entropy_stderr,fisher_stderr"
    )

    def csv_row(self) -> str:
        cells = [
            f"{self.t:.17g}",
            str(self.n_particles),
            str(self.n_replicas),
            *(f"{getattr(self, f):.17g}" for f in _FIELDS),
            "1" if self.ckp_ok else "0",
            *(f"{getattr(self, f + '_stderr'):.17g}" for f in _FIELDS),
        ]
        return ",".join(cells)


def conditional_average(replicas: list[ReplicaMetrics], n_particles: int) -> MetricReport:
    """Mean and standard error across replicas sharing one common path."""
    if not replicas:
        raise ConfigError("conditional average of zero replicas")
    prints = {r.fingerprint for r in replicas}
    if len(prints) > 1:
        raise ConfigError(f"replicas mix {len(prints)} distinct common paths")
    ts = {r.t for r in replicas}
    if len(ts) > 1:
        raise ConfigError("replicas report different times")
    R = len(replicas)
    means, errs = {}, {}
    for f in _FIELDS:
        vals = np.array([getattr(r, f) for r in replicas])
        means[f] = float(vals.mean())
        errs[f] = float(vals.std(ddof=1) / np.sqrt(R)) if R > 1 else 0.0
    return MetricReport(
        t=replicas[0].t,
        n_particles=n_particles,
        n_replicas=R,
        ckp_ok=ckp_holds(means["tv"], means["rel_entropy"]),
        **means,
        **{f + "_stderr": errs[f] for f in _FIELDS},
    )


def rate_fit(points) -> tuple[float, float, float]:
    """Least-squares slope of log(error) against log(N).

    Returns (slope, intercept, r_squared).
    """
    pts = [(float(n), float(e)) for n, e in points]
    if len(pts) < 3:
        raise ConfigError("rate fit needs at least 3 points")
    if any(n <= 0 or e <= 0 for n, e in pts):
        raise ConfigError("rate fit needs positive sizes and errors")
    x = np.log([n for n, _ in pts])
    y = np.log([e for _, e in pts])
    if np.ptp(x) == 0:
        raise ConfigError("rate fit needs at least two distinct sizes")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(slope), float(intercept), r2


def mean_inverse_distance(positions: np.ndarray, r: float = 1.0) -> float:
    """Mean of |x_i - x_j|^{-r} over ordered pairs i != j, torus metric."""
    n = len(positions)
    diff = positions[:, None, :] - positions[None, :, :]
    diff = np.mod(diff + np.pi, TWO_PI) - np.pi
    dist = np.sqrt((diff**2).sum(axis=-1))
    np.fill_diagonal(dist, np.inf)
    return float(np.sum(dist**-r) / (n * (n - 1)))


def envelope_constant(fisher_vals, inv_dist_vals, beta: float = 7.0 / 8.0) -> float:
    """Fitted C with inv_dist <= C (I^beta + 1) across the logged scatter."""
    f = np.asarray(fisher_vals, dtype=float)
    d = np.asarray(inv_dist_vals, dtype=float)
    if f.shape != d.shape or f.size == 0:
        raise ConfigError("envelope fit needs matching non-empty samples")
    return float(np.max(d / (f**beta + 1.0)))
