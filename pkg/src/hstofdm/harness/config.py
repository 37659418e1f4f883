"""Flat JSON experiment configuration with strict key checking.

Defaults reproduce the reference scenario: 1200 m cells 2000 m apart
with a 50 m railway standoff, a 2.35 GHz carrier, a 500 km/h train with
antennas at the front and rear, 512 subcarriers, 30 pilots, 64 delay
taps with 8 dominant ones, and a 1.2 ms packet.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from .. import bem, channel, eliminator, geometry


@dataclass
class ExperimentConfig:
    # geometry
    d_max_m: float = 1200.0
    d_min_m: float = 50.0
    d_s_m: float = 2000.0
    d_c_m: float = 400.0
    num_cells: int = 2
    # carrier / timing
    carrier_hz: float = 2.35e9
    lightspeed_mps: float = 3.0e8
    packet_duration_s: float = 1.2e-3
    # train
    speed_kmh: float = 500.0
    train_length_m: float = 240.0
    antenna_offsets_m: tuple[float, ...] = (-240.0, 0.0)
    track_position_m: float = 2200.0
    position_error_m: float = 0.0
    # OFDM / channel dimensions
    subcarriers: int = 512
    pilots: int = 30
    delay_taps: int = 64
    sparsity: int = 8
    modulation: str = "qam4"
    pilot_power: float = 1.0
    pilot_phase: str = "constant"
    power_delay_profile: str = "uniform"
    # models
    bem_kind: str = "ce"
    bem_oversample: int = 2
    channel_mode: str = channel.STRICT_BEM
    elimination_mode: str = eliminator.ORACLE
    band_radius: int | None = None
    # estimation
    estimator: str = "omp"
    omp_sparsity: int | None = None
    bpdn_epsilon_scale: float = 1.0
    bpdn_max_iter: int = 600
    # pilot design
    pilot_design: str = "alg1"
    pilot_pattern_file: str | None = None
    design_sweeps: int = 100
    coherence_delta: float = 0.1
    # sweeps
    snr_grid_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    position_grid_m: tuple[float, ...] = tuple(float(p) for p in range(1300, 3101, 100))
    velocity_grid_kmh: tuple[float, ...] = (100.0, 200.0, 300.0, 400.0, 500.0)
    # execution
    trials: int = 500
    seed: int = 12345
    threads: int = 1

    def __post_init__(self) -> None:
        self.antenna_offsets_m = tuple(float(a) for a in self.antenna_offsets_m)
        self.snr_grid_db = tuple(float(s) for s in self.snr_grid_db)
        self.position_grid_m = tuple(float(p) for p in self.position_grid_m)
        self.velocity_grid_kmh = tuple(float(v) for v in self.velocity_grid_kmh)
        self.validate()

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        for name in ("snr_grid_db", "position_grid_m", "velocity_grid_kmh"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        if self.pilots >= self.subcarriers:
            raise ValueError("pilot count must be below the subcarrier count")
        if self.sparsity > self.delay_taps:
            raise ValueError("sparsity cannot exceed the tap count")
        if self.bem_kind not in (bem.CE, bem.GCE):
            raise ValueError(f"unknown bem_kind {self.bem_kind!r}")
        if self.channel_mode not in (channel.STRICT_BEM, channel.CONTINUOUS_DOPPLER):
            raise ValueError(f"unknown channel_mode {self.channel_mode!r}")
        if self.elimination_mode not in (eliminator.ORACLE, eliminator.PHYSICAL):
            raise ValueError(f"unknown elimination_mode {self.elimination_mode!r}")
        if self.estimator not in ("omp", "bp", "ls"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.pilot_design not in ("alg1", "equidistant", "file"):
            raise ValueError(f"unknown pilot_design {self.pilot_design!r}")
        if self.pilot_design == "file" and not self.pilot_pattern_file:
            raise ValueError("pilot_design 'file' needs pilot_pattern_file")
        # construct the geometry objects so their invariants run too
        self.layout()
        self.doppler_params()

    # -- derived model objects ------------------------------------------------

    def layout(self) -> geometry.CellLayout:
        return geometry.CellLayout(
            d_max=self.d_max_m,
            d_min=self.d_min_m,
            d_s=self.d_s_m,
            d_c=self.d_c_m,
            num_cells=self.num_cells,
        )

    def doppler_params(self) -> geometry.DopplerParams:
        return geometry.DopplerParams(
            carrier_hz=self.carrier_hz,
            lightspeed=self.lightspeed_mps,
            packet_duration=self.packet_duration_s,
        )

    def speed_mps(self, speed_kmh: float | None = None) -> float:
        return (self.speed_kmh if speed_kmh is None else speed_kmh) / 3.6

    def oversample(self) -> int:
        return 1 if self.bem_kind == bem.CE else self.bem_oversample

    def bem_config(self, speed_kmh: float | None = None) -> bem.BemConfig:
        f_max = self.doppler_params().max_doppler(self.speed_mps(speed_kmh))
        order = bem.bem_order(f_max, self.packet_duration_s, self.oversample())
        return bem.BemConfig(
            kind=self.bem_kind,
            num_subcarriers=self.subcarriers,
            order=order,
            oversample=self.oversample(),
        )

    def effective_band_radius(self) -> int:
        if self.band_radius is not None:
            return self.band_radius
        return 0 if self.bem_kind == bem.CE else 2

    def elimination(self) -> eliminator.EliminationMode:
        return eliminator.EliminationMode(
            kind=self.elimination_mode, band_radius=self.effective_band_radius()
        )

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("antenna_offsets_m", "snr_grid_db", "position_grid_m", "velocity_grid_kmh"):
            out[key] = list(out[key])
        return out

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}


def config_from_dict(data: dict) -> ExperimentConfig:
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**data)


def load_config(path: str | None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a flat JSON config file and apply CLI overrides."""
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
    if overrides:
        data.update(overrides)
    return config_from_dict(data)
