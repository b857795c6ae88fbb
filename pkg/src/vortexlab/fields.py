"""Periodic scalar fields on a uniform torus grid, stored spectrally.

Coefficient convention: ``f(x) = sum_m coeff(m) exp(i m.x)`` with modes
ordered as numpy's fft layout along each axis and the grid starting at
x = -pi (a (-1)^(m1+m2) phase links this to the raw FFT).  Norms follow the
same convention: ``sobolev_norm(f, s)^2 = sum (1+|m|^2)^s |coeff(m)|^2``,
which for s = 0 is the L^2 norm under the normalized measure dx/(2 pi)^2.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, GridMismatchError

TWO_PI = 2.0 * np.pi


@lru_cache(maxsize=32)
def mode_grids(n: int):
    """Integer mode arrays (m1, m2) in fft layout, shape (n, n) each."""
    m = np.fft.fftfreq(n, d=1.0 / n)
    m1, m2 = np.meshgrid(m, m, indexing="ij")
    return m1, m2


@lru_cache(maxsize=32)
def _phase(n: int):
    m1, m2 = mode_grids(n)
    return ((-1.0) ** (m1 + m2)).astype(float)


@lru_cache(maxsize=32)
def grid_points(n: int):
    """Physical grid: x_i = -pi + 2 pi i / n along each axis."""
    x = -np.pi + TWO_PI * np.arange(n) / n
    return np.meshgrid(x, x, indexing="ij")


@dataclass
class SpectralField:
    """A scalar field as an (n, n) array of Fourier coefficients."""

    n: int
    coeff: np.ndarray
    t: float = 0.0
    real: bool = True
    _values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def values(self) -> np.ndarray:
        """Physical grid values (cached when loaded from disk)."""
        if self._values is not None:
            return self._values
        v = np.fft.ifft2(self.coeff * _phase(self.n)) * self.n**2
        if self.real:
            return v.real
        return v

    def check_hermitian(self, tol: float = 1e-10) -> None:
        """Assert the Hermitian symmetry implied by the real flag."""
        if not self.real:
            return
        c = self.coeff
        err = np.max(np.abs(c - np.conj(np.roll(np.flip(c, axis=(0, 1)), 1, axis=(0, 1)))))
        if err > tol * (1.0 + np.max(np.abs(c))):
            raise ConfigError(f"field flagged real but Hermitian symmetry violated by {err:g}")

    def copy(self, **kw) -> "SpectralField":
        out = SpectralField(self.n, self.coeff.copy(), self.t, self.real)
        for k, v in kw.items():
            setattr(out, k, v)
        return out


def transform(values: np.ndarray, t: float = 0.0, real: bool = True) -> SpectralField:
    """Grid values -> SpectralField.  Grid size must be a power of two."""
    values = np.asarray(values)
    n = values.shape[0]
    if values.shape != (n, n) or n & (n - 1) != 0 or n == 0:
        raise ConfigError(f"grid must be square with power-of-two size, got {values.shape}")
    coeff = np.fft.fft2(values) / n**2 * _phase(n)
    return SpectralField(n, coeff, t=t, real=real)


def inverse_transform(f: SpectralField) -> np.ndarray:
    return f.values()


@dataclass(frozen=True)
class SobolevOrder:
    """Real Sobolev order s with an explicit mode cutoff (max-norm)."""

    s: float
    cutoff: int | None = None


def sobolev_norm(f: SpectralField, order: SobolevOrder | float) -> float:
    if not isinstance(order, SobolevOrder):
        order = SobolevOrder(float(order))
    m1, m2 = mode_grids(f.n)
    w = (1.0 + m1**2 + m2**2) ** order.s
    if order.cutoff is not None:
        if order.cutoff > f.n // 2:
            raise ConfigError("cutoff exceeds the grid Nyquist mode")
        w = np.where((np.abs(m1) <= order.cutoff) & (np.abs(m2) <= order.cutoff), w, 0.0)
    return float(np.sqrt(np.sum(w * np.abs(f.coeff) ** 2)))


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.coeff) ** 2)))


def gradient(f: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Spectral gradient; the unmatched Nyquist modes are zeroed."""
    m1, m2 = mode_grids(f.n)
    nyq = f.n // 2
    keep = (np.abs(m1) != nyq) & (np.abs(m2) != nyq)
    c = np.where(keep, f.coeff, 0.0)
    g1 = SpectralField(f.n, 1j * m1 * c, t=f.t, real=f.real)
    g2 = SpectralField(f.n, 1j * m2 * c, t=f.t, real=f.real)
    return g1, g2


def laplacian(f: SpectralField) -> SpectralField:
    m1, m2 = mode_grids(f.n)
    return SpectralField(f.n, -(m1**2 + m2**2) * f.coeff, t=f.t, real=f.real)


def biot_savart_convolve(v: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Velocity K*v: per-mode multiplier i m_perp / |m|^2, zero mean mode.

    The output is real and spectrally divergence-free (m . m_perp = 0).
    """
    m1, m2 = mode_grids(v.n)
    norm2 = m1**2 + m2**2
    inv = np.zeros_like(norm2)
    np.divide(1.0, norm2, out=inv, where=norm2 > 0)
    nyq = v.n // 2
    inv = np.where((np.abs(m1) != nyq) & (np.abs(m2) != nyq), inv, 0.0)
    u1 = SpectralField(v.n, 1j * m2 * inv * v.coeff, t=v.t, real=v.real)
    u2 = SpectralField(v.n, -1j * m1 * inv * v.coeff, t=v.t, real=v.real)
    return u1, u2


@lru_cache(maxsize=32)
def dealias_mask(n: int):
    """2/3-rule mask: keep modes with max(|m1|, |m2|) <= n/3."""
    m1, m2 = mode_grids(n)
    cut = n // 3
    return (np.abs(m1) <= cut) & (np.abs(m2) <= cut)


def advect_term(v: SpectralField, u: tuple[SpectralField, SpectralField]) -> SpectralField:
    """Pseudospectral u . grad v with 2/3-rule dealiasing."""
    u1, u2 = u
    if not (v.n == u1.n == u2.n):
        raise GridMismatchError("advect_term requires fields on the same grid")
    mask = dealias_mask(v.n)
    g1, g2 = gradient(SpectralField(v.n, np.where(mask, v.coeff, 0.0), t=v.t, real=v.real))
    u1v = SpectralField(v.n, np.where(mask, u1.coeff, 0.0), real=u1.real).values()
    u2v = SpectralField(v.n, np.where(mask, u2.coeff, 0.0), real=u2.real).values()
    prod = u1v * g1.values() + u2v * g2.values()
    out = transform(prod, t=v.t, real=True)
    out.coeff = np.where(mask, out.coeff, 0.0)
    return out


def save_field(f: SpectralField, path) -> None:
    """Header (n, t, real flag), then row-major little-endian doubles."""
    vals = np.ascontiguousarray(f.values(), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qdq", f.n, f.t, int(f.real)))
        fh.write(vals.tobytes())


def load_field(path) -> SpectralField:
    with open(path, "rb") as fh:
        n, t, real_flag = struct.unpack("<qdq", fh.read(24))
        vals = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape(n, n).copy()
    f = transform(vals, t=t, real=bool(real_flag))
    f._values = vals  # keep the exact bytes for bit-exact re-save
    return f
