"""Fractional power encoding on top of holographic reduced representations.

Conventions: the forward FFT is unnormalized and the inverse carries 1/d, so a
vector whose Fourier coefficients all have unit magnitude has unit L2 norm.
All functions here are pure and operate on numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidDimensionError, ShapeError

DEFAULT_DIM = 128


@dataclass(frozen=True)
class UnitaryBasis:
    """Real base vector whose spectrum lies on the unit circle."""

    dim: int
    values: np.ndarray
    seed: int
    phases: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.dim,):
            raise ShapeError(f"basis values must have shape ({self.dim},), got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.phases is None:
            phases = np.angle(np.fft.rfft(values))
            phases.setflags(write=False)
            object.__setattr__(self, "phases", phases)


def sample_unitary_basis(dim: int, seed: int) -> UnitaryBasis:
    """Draw a random unitary vector of length ``dim``.

    Phases of the free half-spectrum bins are uniform on (-pi, pi]; the DC bin
    and, for even ``dim``, the Nyquist bin are fixed to +1 so that every
    fractional power of the spectrum stays conjugate-symmetric.
    """
    if int(dim) < 2:
        raise InvalidDimensionError(f"dim must be >= 2, got {dim}")
    dim = int(dim)
    n_bins = dim // 2 + 1
    gen = np.random.default_rng(seed)
    phases = np.zeros(n_bins)
    n_free = (dim + 1) // 2 - 1
    # pi - U[0, 2pi) lies in (-pi, pi]
    phases[1 : 1 + n_free] = np.pi - gen.uniform(0.0, 2.0 * np.pi, size=n_free)
    values = np.fft.irfft(np.exp(1j * phases), n=dim)
    return UnitaryBasis(dim=dim, values=values, seed=int(seed))


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ShapeError(f"length mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def circular_convolve(a, b) -> np.ndarray:
    """Binding: ``c[n] = sum_k a[k] b[(n - k) mod d]`` along the last axis."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    d = a.shape[-1]
    return np.fft.irfft(np.fft.rfft(a) * np.fft.rfft(b), n=d)


def circular_correlate(a, b) -> np.ndarray:
    """Approximate unbinding: ``c[m] = sum_n a[n] b[(n - m) mod d]``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    d = a.shape[-1]
    return np.fft.irfft(np.fft.rfft(a) * np.conj(np.fft.rfft(b)), n=d)


def bundle(vectors) -> np.ndarray:
    return np.sum(np.asarray(vectors, dtype=np.float64), axis=0)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def _check_angle(r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if np.any(~np.isfinite(r)) or np.any(r < 0.0) or np.any(r > 1.0):
        raise DomainError(f"rotation fraction must lie in [0, 1], got {r}")
    return r


def rot(v: UnitaryBasis, r) -> np.ndarray:
    """Fractional power of ``v``: each spectral phase is scaled by ``r``.

    ``r`` may be a scalar (returns shape ``(d,)``) or an array of fractions
    (returns one key per entry, stacked on a leading axis).
    """
    r = _check_angle(r)
    spectrum = np.exp(1j * np.multiply.outer(r, v.phases))
    return np.fft.irfft(spectrum, n=v.dim)


def key_similarity(v: UnitaryBasis, r1: float, r2: float) -> float:
    return cosine_similarity(rot(v, r1), rot(v, r2))


def key_similarity_matrix_from_angles(v: UnitaryBasis, angles) -> np.ndarray:
    keys = rot(v, np.asarray(angles, dtype=np.float64))
    keys = keys / np.linalg.norm(keys, axis=1, keepdims=True)
    sim = keys @ keys.T
    return (sim + sim.T) / 2.0
