"""Hierarchically seeded Brownian increments and initial-data sampling.

Every random stream in the package is addressed by ``(master_seed, tag,
indices...)`` through a counter-based generator (Philox), so the same
address always yields the same bytes regardless of evaluation order or
thread count.  The common path W is meant to be generated once, on the
finest time grid any consumer uses; coarser consumers take exact partial
sums via :func:`derive_coarse`.  This is the operational meaning of
conditioning the whole experiment on a fixed environmental-noise path.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ValidationError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SeedTree:
    """Root of the deterministic stream hierarchy.

    ``stream(tag, *indices)`` maps the address to an independent Philox
    substream.  Distinct addresses share no state; identical addresses
    reproduce identical byte streams.
    """

    master_seed: int

    def _key(self, tag: str, indices: tuple[int, ...]) -> np.ndarray:
        h = hashlib.sha256()
        h.update(struct.pack("<q", self.master_seed))
        h.update(tag.encode("utf-8"))
        for ix in indices:
            h.update(struct.pack("<q", int(ix)))
        digest = h.digest()
        return np.frombuffer(digest[:16], dtype=np.uint64)

    def stream(self, tag: str, *indices: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self._key(tag, tuple(indices))))


@dataclass
class NoisePaths:
    """Brownian increments over a shared time grid.

    time_grid: L+1 strictly increasing instants, t_0 = 0.
    common:    (L, d) increments of the environmental paths W^k.
    individual:(L, N, 2) increments of the per-particle paths B_i.
    """

    time_grid: np.ndarray
    common: np.ndarray
    individual: np.ndarray
    master_seed: int = 0

    @property
    def n_steps(self) -> int:
        return len(self.time_grid) - 1

    @property
    def d(self) -> int:
        return self.common.shape[1]

    @property
    def n_particles(self) -> int:
        return self.individual.shape[1]

    def dts(self) -> np.ndarray:
        return np.diff(self.time_grid)

    def common_fingerprint(self) -> str:
        """SHA-256 of the common-path bytes; used to assert that the particle
        and SPDE solvers consumed the same environmental noise."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.time_grid).tobytes())
        h.update(np.ascontiguousarray(self.common).tobytes())
        return h.hexdigest()

    def save(self, path) -> None:
        """Binary persistence: header (L, d, N, master_seed) as little-endian
        int64, then grid / common / individual as little-endian float64."""
        with open(path, "wb") as f:
            L = self.n_steps
            f.write(struct.pack("<qqqq", L, self.d, self.n_particles, self.master_seed))
            f.write(self.time_grid.astype("<f8").tobytes())
            f.write(np.ascontiguousarray(self.common, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(self.individual, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "NoisePaths":
        with open(path, "rb") as f:
            L, d, n, seed = struct.unpack("<qqqq", f.read(32))
            grid = np.frombuffer(f.read(8 * (L + 1)), dtype="<f8").copy()
            common = np.frombuffer(f.read(8 * L * d), dtype="<f8").reshape(L, d).copy()
            indiv = np.frombuffer(f.read(8 * L * n * 2), dtype="<f8").reshape(L, n, 2).copy()
        return cls(grid, common, indiv, master_seed=seed)


def _check_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ConfigError("time grid needs at least two instants")
    if not np.all(np.diff(grid) > 0):
        raise ConfigError("time grid must be strictly increasing")
    return grid


def make_paths(seed_tree: SeedTree, grid, d: int, n: int, replica: int = 0) -> NoisePaths:
    """Generate Brownian increments on ``grid``.

    The common paths depend only on (seed, k); the individual paths also
    carry the replica index, so replicas resample B while sharing W.
    """
    grid = _check_grid(grid)
    if d < 0 or n < 0:
        raise ConfigError("d and n must be nonnegative")
    L = len(grid) - 1
    sqdt = np.sqrt(np.diff(grid))
    common = np.empty((L, d))
    for k in range(d):
        common[:, k] = seed_tree.stream("W", k).standard_normal(L) * sqdt
    individual = np.empty((L, n, 2))
    for i in range(n):
        individual[:, i, :] = (
            seed_tree.stream("B", replica, i).standard_normal((L, 2)) * sqdt[:, None]
        )
    return NoisePaths(grid, common, individual, master_seed=seed_tree.master_seed)


def derive_coarse(paths: NoisePaths, factor: int) -> NoisePaths:
    """Exact coarsening: sum blocks of ``factor`` consecutive fine increments.

    The sums are taken in index order, so the coarse increments equal the
    fine partial sums bit-for-bit no matter how often this is called.
    """
    if factor < 1 or paths.n_steps % factor != 0:
        raise ConfigError(f"coarsening factor {factor} does not divide {paths.n_steps} steps")
    L = paths.n_steps // factor
    grid = paths.time_grid[::factor]
    common = paths.common.reshape(L, factor, paths.d).sum(axis=1)
    individual = paths.individual.reshape(L, factor, paths.n_particles, 2).sum(axis=1)
    return NoisePaths(grid, common, individual, master_seed=paths.master_seed)


def sample_initial(seed_tree: SeedTree, density: np.ndarray, n: int, replica: int = 0) -> np.ndarray:
    """Draw n i.i.d. torus points from a gridded density via inverse CDF.

    ``density`` is an (ng, ng) nonnegative array of cell values on
    [-pi, pi)^2 integrating to 1 (cell area (2*pi/ng)^2) within 1e-10.
    Sampling picks a cell by inverse CDF and jitters uniformly inside it;
    rejection-free and deterministic given the seed.
    """
    density = np.asarray(density, dtype=float)
    if density.ndim != 2 or density.shape[0] != density.shape[1]:
        raise ValidationError("density must be a square grid")
    if np.any(density < 0):
        raise ValidationError("density has negative cells")
    ng = density.shape[0]
    area = (TWO_PI / ng) ** 2
    total = density.sum() * area
    if abs(total - 1.0) > 1e-10:
        raise ValidationError(f"density integrates to {total!r}, expected 1")
    probs = (density * area).ravel()
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    rng = seed_tree.stream("X0", replica)
    u = rng.random(n)
    cells = np.searchsorted(cdf, u, side="right")
    jitter = rng.random((n, 2))
    ix, iy = cells // ng, cells % ng
    dx = TWO_PI / ng
    pts = np.empty((n, 2))
    pts[:, 0] = -np.pi + (ix + jitter[:, 0]) * dx
    pts[:, 1] = -np.pi + (iy + jitter[:, 1]) * dx
    return pts


@dataclass(frozen=True)
class UniformLaw:
    """Uniform intensity law on [a, b]."""

    a: float
    b: float

    def mean(self) -> float:
        return 0.5 * (self.a + self.b)

    def support(self) -> tuple[float, float]:
        return (self.a, self.b)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.a, self.b, size=n)


@dataclass(frozen=True)
class DiscreteLaw:
    """Finitely supported intensity law (atoms with probabilities)."""

    atoms: tuple
    probs: tuple

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if abs(p.sum() - 1.0) > 1e-12 or np.any(p < 0):
            raise ConfigError("atom probabilities must be nonnegative and sum to 1")

    def mean(self) -> float:
        return float(np.dot(self.atoms, self.probs))

    def support(self) -> tuple[float, float]:
        return (min(self.atoms), max(self.atoms))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.choice(len(self.atoms), size=n, p=np.asarray(self.probs, dtype=float))
        return np.asarray(self.atoms, dtype=float)[idx]


def sample_intensities(seed_tree: SeedTree, law, n: int, replica: int = 0) -> np.ndarray:
    """Draw n i.i.d. intensities; the law must have strictly positive mean.

    A non-positive mean violates the standing assumption on the intensity
    law and is rejected outright.
    """
    if law.mean() <= 0:
        raise ConfigError(f"intensity law has non-positive mean {law.mean()}")
    lo, hi = law.support()
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ConfigError("intensity law must have compact support")
    rng = seed_tree.stream("xi", replica)
    return law.sample(rng, n)
