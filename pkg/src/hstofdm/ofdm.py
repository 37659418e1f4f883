"""Frame construction, multi-cell reception, interference accounting and
QAM4 detection.

The simulator works entirely post-DFT: a frame is a length-K vector of
frequency-domain symbols (constant-amplitude pilots plus Gray-mapped
QAM4 data), and reception is y = sum_t H_t x_t + noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

QAM4 = "qam4"

# Gray-mapped QAM4: first bit -> real sign, second bit -> imag sign.
_QAM4_SCALE = 1.0 / np.sqrt(2.0)


def qam4_map(bits: np.ndarray) -> np.ndarray:
    """Map pairs of bits to unit-power QAM4 points."""
    b = np.asarray(bits).reshape(-1, 2)
    return ((1 - 2 * b[:, 0]) + 1j * (1 - 2 * b[:, 1])) * _QAM4_SCALE


def qam4_demap(symbols: np.ndarray) -> np.ndarray:
    """Nearest-point QAM4 decision followed by Gray decode."""
    s = np.asarray(symbols)
    bits = np.empty((s.size, 2), dtype=np.int64)
    bits[:, 0] = (s.real < 0).astype(np.int64)
    bits[:, 1] = (s.imag < 0).astype(np.int64)
    return bits.reshape(-1)


@dataclass(frozen=True)
class FrameSpec:
    """Pilot/data split of one transmitted OFDM symbol.

    Pilots all carry squared amplitude ``pilot_power``; by default they
    share a fixed zero phase, optionally randomized per frame.
    """

    num_subcarriers: int
    pilot_pattern: np.ndarray
    pilot_power: float = 1.0
    modulation: str = QAM4
    pilot_phase: str = "constant"

    def __post_init__(self) -> None:
        pattern = np.unique(np.asarray(self.pilot_pattern, dtype=np.int64))
        if pattern.size and (pattern[0] < 0 or pattern[-1] >= self.num_subcarriers):
            raise ValueError("pilot indices out of range")
        if pattern.size != np.asarray(self.pilot_pattern).size:
            raise ValueError("pilot indices must be unique")
        if self.modulation != QAM4:
            raise ValueError(f"unsupported modulation {self.modulation!r}")
        if self.pilot_power <= 0:
            raise ValueError("pilot power must be positive")
        object.__setattr__(self, "pilot_pattern", pattern)

    @cached_property
    def data_pattern(self) -> np.ndarray:
        mask = np.ones(self.num_subcarriers, dtype=bool)
        mask[self.pilot_pattern] = False
        return np.flatnonzero(mask)


@dataclass(frozen=True)
class TxFrame:
    """Realized frequency-domain symbol vector plus its payload bits."""

    spec: FrameSpec
    symbols: np.ndarray
    payload_bits: np.ndarray

    def with_zero_data(self) -> "TxFrame":
        """Copy with the data subcarriers muted (pilot-only genie frame)."""
        symbols = self.symbols.copy()
        symbols[self.spec.data_pattern] = 0.0
        return TxFrame(spec=self.spec, symbols=symbols, payload_bits=self.payload_bits)

    def with_guards(self, guard_indices: np.ndarray) -> "TxFrame":
        """Copy with the given subcarriers silenced (guard positions)."""
        symbols = self.symbols.copy()
        symbols[np.asarray(guard_indices, dtype=np.int64)] = 0.0
        return TxFrame(spec=self.spec, symbols=symbols, payload_bits=self.payload_bits)


def build_frame(rng: np.random.Generator, spec: FrameSpec) -> TxFrame:
    """Draw a frame: constant-amplitude pilots and random QAM4 data."""
    symbols = np.zeros(spec.num_subcarriers, dtype=complex)
    amplitude = np.sqrt(spec.pilot_power)
    if spec.pilot_phase == "random":
        phases = np.exp(2j * np.pi * rng.integers(0, 4, spec.pilot_pattern.size) / 4.0)
    elif spec.pilot_phase == "constant":
        phases = np.ones(spec.pilot_pattern.size)
    else:
        raise ValueError(f"unknown pilot phase rule {spec.pilot_phase!r}")
    symbols[spec.pilot_pattern] = amplitude * phases
    bits = rng.integers(0, 2, size=2 * spec.data_pattern.size)
    symbols[spec.data_pattern] = qam4_map(bits)
    return TxFrame(spec=spec, symbols=symbols, payload_bits=bits)


@dataclass(frozen=True)
class RxSignal:
    """Received frequency-domain vector at one antenna."""

    samples: np.ndarray
    noise_variance: float


def complex_noise(rng: np.random.Generator, size: int, variance: float) -> np.ndarray:
    """Circular complex Gaussian noise with the given per-entry variance."""
    if variance == 0.0:
        return np.zeros(size, dtype=complex)
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def transmit(
    channels: dict[int, np.ndarray],
    frames: dict[int, TxFrame],
    noise_variance: float,
    rng: np.random.Generator,
) -> RxSignal:
    """Superpose the per-cell channel outputs and add AWGN."""
    if set(channels) != set(frames):
        raise ValueError("channels and frames must cover the same cells")
    first = next(iter(frames.values()))
    K = first.spec.num_subcarriers
    samples = np.zeros(K, dtype=complex)
    for cell in sorted(channels):
        matrix = channels[cell]
        if matrix.shape != (K, K):
            raise ValueError("channel dimension mismatch")
        samples = samples + matrix @ frames[cell].symbols
    samples = samples + complex_noise(rng, K, noise_variance)
    return RxSignal(samples=samples, noise_variance=noise_variance)


@dataclass(frozen=True)
class InterferenceDecomposition:
    """Pilot-row power split: desired pilots, own-cell data ICI, other-cell
    interference, and noise."""

    desired_power: float
    self_ici_power: float
    mci_power: float
    noise_power: float

    def to_db(self) -> dict[str, float]:
        def db(p: float) -> float:
            return 10.0 * np.log10(p) if p > 0 else -np.inf

        return {
            "desired_db": db(self.desired_power),
            "ici_db": db(self.self_ici_power),
            "mci_db": db(self.mci_power),
            "noise_db": db(self.noise_power),
        }


def decompose_interference(
    channels: dict[int, np.ndarray],
    frames: dict[int, TxFrame],
    pilot_patterns: dict[int, np.ndarray],
    target_cell: int,
    noise: np.ndarray | None = None,
) -> InterferenceDecomposition:
    """Split the pilot-row received power for one cell of interest.

    The desired term is the target channel restricted to pilot rows and
    pilot columns; the self-ICI term is its leakage from own data
    columns; everything from other cells lands in the MCI term.  The
    three component vectors sum exactly to the noiseless pilot rows.
    """
    w = np.asarray(pilot_patterns[target_cell], dtype=np.int64)
    frame = frames[target_cell]
    d = frame.spec.data_pattern
    h = channels[target_cell]
    desired = h[np.ix_(w, w)] @ frame.symbols[w]
    self_ici = h[np.ix_(w, d)] @ frame.symbols[d]
    mci = np.zeros(w.size, dtype=complex)
    for cell in sorted(channels):
        if cell == target_cell:
            continue
        mci = mci + (channels[cell] @ frames[cell].symbols)[w]
    noise_power = float(np.linalg.norm(noise[w]) ** 2) if noise is not None else 0.0
    return InterferenceDecomposition(
        desired_power=float(np.linalg.norm(desired) ** 2),
        self_ici_power=float(np.linalg.norm(self_ici) ** 2),
        mci_power=float(np.linalg.norm(mci) ** 2),
        noise_power=noise_power,
    )


def zf_detect(
    symbols: np.ndarray,
    diag_estimates: np.ndarray,
    data_pattern: np.ndarray,
) -> tuple[np.ndarray, int]:
    """Zero-forcing detection of the data subcarriers.

    Divides by the estimated per-subcarrier response and demaps.  A
    zero-magnitude estimate cannot be equalized; those symbols are
    decoded as the fixed all-zeros-bit point and counted as erasures.
    """
    d = np.asarray(data_pattern, dtype=np.int64)
    est = diag_estimates[d]
    erased = np.abs(est) == 0.0
    safe = np.where(erased, 1.0, est)
    equalized = symbols[d] / safe
    equalized[erased] = _QAM4_SCALE * (1.0 + 1.0j)
    return qam4_demap(equalized), int(np.count_nonzero(erased))
