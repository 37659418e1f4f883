"""Basis expansion machinery: time bases, their frequency-domain images
and inverses, and the partial Fourier (delay response) matrix.

Conventions: the unitary DFT matrix F has entries
``exp(-2j*pi*m*k/K) / sqrt(K)``.  A frequency-domain basis image is
``D_q = F diag(b_q) F^H``; for unit-modulus bases it is unitary and its
inverse is built from the conjugate basis, so no matrix inversion is
ever needed.  The partial Fourier matrix is the first ``L`` columns of
``sqrt(K) * F`` (unit-modulus entries).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CE = "ce"
GCE = "gce"
_KINDS = (CE, GCE)


def bem_order(f_max: float, packet_duration: float, oversample: int = 1) -> int:
    """Smallest even basis order covering Doppler shifts up to ``f_max``.

    Clamped to 2 so a static channel still has distinct neighbor indices.
    """
    if f_max < 0 or packet_duration <= 0 or oversample < 1:
        raise ValueError("inputs must be positive")
    return max(2, 2 * math.ceil(oversample * f_max * packet_duration))


@dataclass(frozen=True)
class BemConfig:
    """Basis family, subcarrier count, even order and oversampling factor."""

    kind: str
    num_subcarriers: int
    order: int
    oversample: int = 1

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown BEM kind {self.kind!r}")
        if self.order % 2 != 0 or self.order < 2:
            raise ValueError("order must be even and >= 2")
        if self.order + 1 > self.num_subcarriers:
            raise ValueError("order too large for subcarrier count")
        if self.oversample < 1:
            raise ValueError("oversample must be >= 1")
        if self.kind == CE and self.oversample != 1:
            object.__setattr__(self, "oversample", 1)

    def bin_offset(self, q: int) -> float:
        """Subcarrier-domain frequency offset of basis ``q`` (may be fractional)."""
        return (q - self.order // 2) / self.oversample


@dataclass(frozen=True)
class BasisSet:
    """The order+1 unit-modulus basis vectors, one row per index q."""

    config: BemConfig
    vectors: np.ndarray

    def vector(self, q: int) -> np.ndarray:
        return self.vectors[q]


def build_basis(config: BemConfig) -> BasisSet:
    """Sample the complex-exponential basis family on the symbol window."""
    k = np.arange(config.num_subcarriers)
    q = np.arange(config.order + 1)[:, None]
    period = config.oversample * config.num_subcarriers
    vectors = np.exp(2j * np.pi * (q - config.order // 2) * k[None, :] / period)
    return BasisSet(config=config, vectors=vectors)


@dataclass(frozen=True)
class FreqBasis:
    """Dense frequency-domain basis images D_q and their inverses G_q."""

    config: BemConfig
    d_matrices: tuple[np.ndarray, ...]
    g_matrices: tuple[np.ndarray, ...]


def _similarity_transform(diag_values: np.ndarray) -> np.ndarray:
    """Dense F diag(v) F^H computed with two FFT passes."""
    K = diag_values.size
    # F diag(v) columnwise, then right-multiply by F^H.
    step = np.fft.fft(np.diag(diag_values), axis=0)
    return np.fft.ifft(step, axis=1)


def freq_basis(basis: BasisSet) -> FreqBasis:
    """Materialize D_q and G_q for every q.

    Unit-modulus bases make each D_q unitary with inverse built from the
    conjugate basis; a (numerically impossible for these families)
    near-zero sample would make the transform singular.
    """
    d_mats = []
    g_mats = []
    for q in range(basis.config.order + 1):
        b = basis.vector(q)
        if np.min(np.abs(b)) < 1e-12:
            raise ValueError("non-invertible basis")
        d_mats.append(_similarity_transform(b))
        g_mats.append(_similarity_transform(np.conj(b)))
    return FreqBasis(config=basis.config, d_matrices=tuple(d_mats), g_matrices=tuple(g_mats))


def apply_d(basis: BasisSet, q: int, vec: np.ndarray) -> np.ndarray:
    """Fast D_q @ vec without materializing the matrix."""
    return np.fft.fft(basis.vector(q) * np.fft.ifft(vec))


def apply_g(basis: BasisSet, q: int, vec: np.ndarray) -> np.ndarray:
    """Fast G_q @ vec (inverse of apply_d for unit-modulus bases)."""
    return np.fft.fft(np.conj(basis.vector(q)) * np.fft.ifft(vec))


@dataclass(frozen=True)
class PartialFourier:
    """First L columns of the scaled DFT matrix: delay -> subcarrier map."""

    num_subcarriers: int
    num_taps: int
    matrix: np.ndarray

    def response(self, taps: np.ndarray) -> np.ndarray:
        """Per-subcarrier frequency response of a delay-domain tap vector."""
        return self.matrix @ taps

    def rows(self, indices: np.ndarray) -> np.ndarray:
        return self.matrix[np.asarray(indices)]


def partial_fourier(num_subcarriers: int, num_taps: int) -> PartialFourier:
    if num_taps > num_subcarriers:
        raise ValueError("tap span cannot exceed subcarrier count")
    k = np.arange(num_subcarriers)[:, None]
    ell = np.arange(num_taps)[None, :]
    matrix = np.exp(-2j * np.pi * k * ell / num_subcarriers)
    return PartialFourier(num_subcarriers, num_taps, matrix)
