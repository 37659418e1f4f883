"""Sparse time-varying channel synthesis and frequency-domain realization.

A link is described by a handful of nonzero delay taps that all ride a
single Doppler (strong line-of-sight assumption).  ``strict_bem`` mode
quantizes that Doppler onto the basis grid, making the channel exactly
rank-one in the basis; ``continuous_doppler`` keeps the exact phase so
the basis-model mismatch is realized implicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .bem import BasisSet, BemConfig, PartialFourier

STRICT_BEM = "strict_bem"
CONTINUOUS_DOPPLER = "continuous_doppler"
_MODES = (STRICT_BEM, CONTINUOUS_DOPPLER)


@dataclass(frozen=True)
class SparseBemChannel:
    """Sparse delay taps plus the Doppler state of one (cell, antenna) link."""

    support: np.ndarray
    gains: np.ndarray
    dominant_index: int
    num_taps: int
    doppler_hz: float

    def tap_vector(self) -> np.ndarray:
        """Dense length-L delay-domain coefficient vector."""
        taps = np.zeros(self.num_taps, dtype=complex)
        taps[self.support] = self.gains
        return taps


def sample_channel(
    rng: np.random.Generator,
    num_taps: int,
    sparsity: int,
    dominant_index: int,
    doppler_hz: float,
    profile: str = "uniform",
) -> SparseBemChannel:
    """Draw a random sparse link: uniform support, unit total power.

    ``profile`` selects the power-delay profile of the gains before
    normalization ("uniform" or "exponential").
    """
    if sparsity > num_taps:
        raise ValueError("sparsity cannot exceed tap count")
    support = np.sort(rng.choice(num_taps, size=sparsity, replace=False))
    gains = (rng.standard_normal(sparsity) + 1j * rng.standard_normal(sparsity)) / np.sqrt(2.0)
    if profile == "exponential":
        gains = gains * np.exp(-0.5 * support / max(1, num_taps / 4))
    elif profile != "uniform":
        raise ValueError(f"unknown power-delay profile {profile!r}")
    norm = np.linalg.norm(gains)
    if norm > 0:
        gains = gains / norm
    return SparseBemChannel(
        support=support,
        gains=gains,
        dominant_index=dominant_index,
        num_taps=num_taps,
        doppler_hz=doppler_hz,
    )


def channel_phase(
    ch: SparseBemChannel,
    basis: BasisSet,
    mode: str,
    packet_duration: float | None = None,
) -> np.ndarray:
    """Common time-varying phase shared by all taps of the link."""
    if mode == STRICT_BEM:
        return basis.vector(ch.dominant_index)
    if mode == CONTINUOUS_DOPPLER:
        if packet_duration is None:
            raise ValueError("continuous mode needs the packet duration")
        K = basis.config.num_subcarriers
        k = np.arange(K)
        return np.exp(2j * np.pi * ch.doppler_hz * packet_duration * k / K)
    raise ValueError(f"unknown channel mode {mode!r}")


def time_taps(
    ch: SparseBemChannel,
    basis: BasisSet,
    mode: str,
    packet_duration: float | None = None,
) -> np.ndarray:
    """K x L array of per-sample tap values h(k, l)."""
    phase = channel_phase(ch, basis, mode, packet_duration)
    return np.outer(phase, ch.tap_vector())


@dataclass(frozen=True)
class FreqChannel:
    """Dense K x K frequency-domain channel matrix with its ICI split."""

    matrix: np.ndarray

    @cached_property
    def diagonal_part(self) -> np.ndarray:
        return np.diag(np.diag(self.matrix))

    @cached_property
    def ici_part(self) -> np.ndarray:
        return self.matrix - self.diagonal_part


def freq_channel(taps: np.ndarray) -> FreqChannel:
    """Realize the frequency-domain matrix of a K x L tap array.

    Builds the pseudo-circulant time-domain matrix (row k applies tap
    h(k, l) to input sample k - l mod K) and conjugates it with the DFT.
    """
    if not np.all(np.isfinite(taps)):
        raise ValueError("taps must be finite")
    K, L = taps.shape
    time_matrix = np.zeros((K, K), dtype=complex)
    rows = np.arange(K)
    for ell in range(L):
        time_matrix[rows, (rows - ell) % K] = taps[:, ell]
    matrix = np.fft.ifft(np.fft.fft(time_matrix, axis=0), axis=1)
    return FreqChannel(matrix=matrix)


def split_ici(fc: FreqChannel) -> tuple[np.ndarray, np.ndarray]:
    """Exact decomposition into the diagonal part and the ICI remainder."""
    return fc.diagonal_part, fc.ici_part


def freq_response(ch: SparseBemChannel, fourier: PartialFourier) -> np.ndarray:
    """Per-subcarrier response of the link's delay taps."""
    return fourier.response(ch.tap_vector())


def apply_channel(phase: np.ndarray, response: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Matrix-free H @ x for a single-Doppler link.

    Equivalent to F diag(phase) F^H diag(response) @ x; two FFTs instead
    of a dense matvec.
    """
    return np.fft.fft(phase * np.fft.ifft(response * x))


def frobenius_gap_sq(
    phase_true: np.ndarray,
    response_true: np.ndarray,
    phase_est: np.ndarray,
    response_est: np.ndarray,
) -> float:
    """Squared Frobenius distance between two single-Doppler channels.

    Uses the rank-one structure: with unit-modulus phases the gap is
    ||r||^2 + ||r_hat||^2 - (2/K) Re(<phase, phase_hat><r, r_hat>).
    """
    K = phase_true.size
    cross = np.vdot(phase_true, phase_est) * np.vdot(response_true, response_est)
    gap = (
        np.linalg.norm(response_true) ** 2
        + np.linalg.norm(response_est) ** 2
        - 2.0 / K * cross.real
    )
    return max(0.0, float(gap))
