"""Railway cell geometry and the position -> Doppler -> basis-index mappings.

All functions are pure; the dataclasses are frozen value objects, so
everything here is safe to share across Monte Carlo workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class CellLayout:
    """Geometry of the evenly spaced base stations along the track.

    ``d_max`` is the BS coverage radius, ``d_min`` the perpendicular
    BS-to-railway distance, ``d_s`` the inter-BS spacing and ``d_c`` the
    nominal overlap length (informational; the realized overlap is
    ``2 * d0 - d_s``).  Cell ``t`` (1-based) starts at track coordinate
    ``(t - 1) * d_s``.
    """

    d_max: float
    d_min: float
    d_s: float
    d_c: float = 0.0
    num_cells: int = 2

    def __post_init__(self) -> None:
        if self.d_min <= 0:
            raise ValueError("d_min must be positive")
        if self.d_max <= self.d_min:
            raise ValueError("d_max must exceed d_min")
        if self.d_s <= 0:
            raise ValueError("d_s must be positive")
        if self.num_cells < 1:
            raise ValueError("need at least one cell")

    @property
    def d0(self) -> float:
        """Half coverage length along the track."""
        return math.sqrt(self.d_max**2 - self.d_min**2)

    @property
    def overlap_length(self) -> float:
        """Realized overlap between adjacent cells (may differ from d_c)."""
        return 2.0 * self.d0 - self.d_s

    def cell_start(self, cell_index: int) -> float:
        """Track coordinate of the entry point of cell ``cell_index``."""
        return (cell_index - 1) * self.d_s


@dataclass(frozen=True)
class TrainState:
    """Instantaneous kinematics: reference-antenna position and speed.

    ``antenna_offsets`` holds each receive antenna's position relative to
    the reference, sorted ascending; their span must fit the train.
    """

    track_position: float
    speed: float
    antenna_offsets: tuple[float, ...] = (0.0,)
    train_length: float = 240.0

    def __post_init__(self) -> None:
        if self.speed < 0:
            raise ValueError("speed must be nonnegative")
        offsets = tuple(float(a) for a in self.antenna_offsets)
        if list(offsets) != sorted(offsets):
            raise ValueError("antenna_offsets must be sorted")
        if offsets and offsets[-1] - offsets[0] > self.train_length:
            raise ValueError("antenna_offsets span exceeds train length")
        object.__setattr__(self, "antenna_offsets", offsets)

    def antenna_positions(self) -> tuple[float, ...]:
        return tuple(self.track_position + a for a in self.antenna_offsets)


@dataclass(frozen=True)
class DopplerParams:
    """Carrier and timing constants entering the Doppler computation.

    ``lightspeed`` defaults to 3.0e8 m/s so that the 500 km/h, 2.35 GHz
    reference scenario gives a 1088.0 Hz maximum shift.
    """

    carrier_hz: float = 2.35e9
    lightspeed: float = 3.0e8
    packet_duration: float = 1.2e-3

    def __post_init__(self) -> None:
        if min(self.carrier_hz, self.lightspeed, self.packet_duration) <= 0:
            raise ValueError("all Doppler parameters must be positive")

    def max_doppler(self, speed: float) -> float:
        """Largest attainable shift magnitude at the given speed."""
        return speed / self.lightspeed * self.carrier_hz


def local_offset(track_position: float, cell_index: int, layout: CellLayout) -> float:
    """Distance of an antenna from the entry point of the given cell.

    Values outside [0, 2 * d0] mean the antenna is outside that cell's
    coverage; that is a meaningful result, not an error.
    """
    return track_position - layout.cell_start(cell_index)


def doppler_shift(
    alpha: float, speed: float, params: DopplerParams, layout: CellLayout
) -> float:
    """Signed Doppler shift seen from a cell at in-cell offset ``alpha``.

    Positive while approaching the BS (alpha < d0), zero broadside,
    negative while receding.
    """
    d0 = layout.d0
    if alpha < 0 or alpha > 2.0 * d0:
        raise ValueError("antenna outside cell coverage")
    along = d0 - alpha
    cos_theta = along / math.hypot(along, layout.d_min)
    return params.max_doppler(speed) * cos_theta


def dominant_index_from_doppler(
    f: float, params: DopplerParams, order: int, oversample: int = 1
) -> int:
    """Quantize a Doppler shift to its dominant basis index.

    Nonnegative shifts round up, negative shifts round down, so the two
    travel directions inside an overlap always map to distinct indices.
    ``oversample`` > 1 applies the oversampled-basis scaling.
    """
    if order % 2 != 0:
        raise ValueError("order must be even")
    scaled = oversample * params.packet_duration * f
    if abs(scaled) > order / 2:
        raise ValueError("Doppler exceeds model order")
    branch = math.ceil(scaled) if f >= 0 else math.floor(scaled)
    return branch + order // 2


def dominant_index_from_position(
    alpha: float,
    layout: CellLayout,
    doppler_span: float,
    order: int,
    oversample: int = 1,
) -> int:
    """Dominant basis index straight from the in-cell antenna offset.

    ``doppler_span`` is ``packet_duration * max_doppler`` for the current
    speed.  The broadside point alpha == d0 belongs to the round-up
    branch (closed lower interval).
    """
    d0 = layout.d0
    if alpha < 0 or alpha > 2.0 * d0:
        raise ValueError("antenna outside cell coverage")
    if order % 2 != 0:
        raise ValueError("order must be even")
    along = d0 - alpha
    scaled = oversample * doppler_span * along / math.hypot(along, layout.d_min)
    if abs(scaled) > order / 2 + 1e-12:
        raise ValueError("Doppler exceeds model order")
    branch = math.ceil(scaled) if alpha <= d0 else math.floor(scaled)
    return branch + order // 2


def serving_cells(track_position: float, layout: CellLayout) -> set[int]:
    """Cells whose coverage contains the given track position."""
    span = 2.0 * layout.d0
    return {
        t
        for t in range(1, layout.num_cells + 1)
        if 0.0 <= local_offset(track_position, t, layout) <= span
    }


def perturb_position(track_position: float, error: float) -> float:
    """Apply a positioning error; downstream indices use the result."""
    return track_position + error
