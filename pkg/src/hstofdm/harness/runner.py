"""Monte Carlo sweeps: MSE / BER versus SNR, position and velocity.

Every sweep is fully deterministic: trial t of sweep point p draws its
random stream from ``SeedSequence(seed, spawn_key=(experiment, p, t))``,
so results do not depend on execution order or worker count.  Per-point
aggregation uses ``math.fsum`` over the trial-ordered values.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import bem, channel, eliminator, estimator, geometry, ofdm, pilot_design
from .config import ExperimentConfig

CSV_HEADER = "experiment,scheme,bem,mode,sweep_var,sweep_value,metric,value,trials,seed,config_hash"

# spawn-key namespaces, one per experiment family
_EXP_MSE_SNR = 1
_EXP_MSE_POSITION = 2
_EXP_MSE_VELOCITY = 3
_EXP_BER = 4
_EXP_DESIGN = 99
_EXP_DIAGNOSE = 5

MSE_SCHEMES = ("prop-omp", "prop-bp", "ls", "no-elim", "ici-free")
BER_SCHEMES = ("prop-omp", "guard-split", "perfect-csi", "awgn-csi")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    scheme: str
    bem: str
    mode: str
    sweep_var: str
    sweep_value: float
    metric: str
    value: float
    trials: int
    seed: int
    config_hash: str

    def to_csv_line(self) -> str:
        return ",".join(
            [
                self.experiment,
                self.scheme,
                self.bem,
                self.mode,
                self.sweep_var,
                repr(float(self.sweep_value)),
                self.metric,
                repr(float(self.value)),
                str(self.trials),
                str(self.seed),
                self.config_hash,
            ]
        )


def write_csv(rows: list[ResultRow], path: str) -> None:
    """Write result rows; refuses to mix rows from different configs."""
    hashes = {row.config_hash for row in rows}
    if len(hashes) > 1:
        raise ValueError("refusing to aggregate rows from different configs")
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(row.to_csv_line() + "\n")


# ---------------------------------------------------------------------------
# sweep-point context
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AntennaView:
    """Geometry digest for one receive antenna at one sweep point."""

    position: float
    serving: tuple[int, ...]
    serving_hat: tuple[int, ...]
    alphas: dict[int, float]
    dopplers: dict[int, float]
    q_true: dict[int, int]
    q_hat: dict[int, int]
    noise_scale: float  # per-subcarrier received power entering the SNR definition


@dataclass(frozen=True)
class PresetDesign:
    """Guard-split baseline: per-cell pilot subsets, guards and shifts."""

    pilot_patterns: dict[int, np.ndarray]
    guard_sets: dict[int, np.ndarray]
    detect_patterns: dict[int, np.ndarray]
    shifts: dict[tuple[int, int], int]  # (antenna index, cell) -> integer bin shift


@dataclass(frozen=True)
class PointContext:
    """Everything fixed across the trials of one sweep point."""

    cfg: ExperimentConfig
    speed_kmh: float
    track_position: float
    bem_cfg: bem.BemConfig
    basis: bem.BasisSet
    fourier: bem.PartialFourier
    pattern: np.ndarray
    frame_spec: ofdm.FrameSpec
    antennas: tuple[AntennaView, ...]
    active_cells: tuple[int, ...]
    preset: PresetDesign | None = None
    awgn_antennas: tuple[AntennaView, ...] = ()

    def bank(self) -> eliminator.EliminatorBank:
        return eliminator.EliminatorBank(basis=self.basis)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _antenna_view(
    cfg: ExperimentConfig,
    layout: geometry.CellLayout,
    params: geometry.DopplerParams,
    position: float,
    speed_mps: float,
    order: int,
) -> AntennaView:
    serving = tuple(sorted(geometry.serving_cells(position, layout)))
    perturbed = geometry.perturb_position(position, cfg.position_error_m)
    serving_hat = tuple(sorted(geometry.serving_cells(perturbed, layout)))
    span = params.packet_duration * params.max_doppler(speed_mps)
    oversample = cfg.oversample()
    alphas, dopplers, q_true, q_hat = {}, {}, {}, {}
    for cell in serving:
        alpha = geometry.local_offset(position, cell, layout)
        alphas[cell] = alpha
        f = geometry.doppler_shift(alpha, speed_mps, params, layout)
        dopplers[cell] = f
        q_true[cell] = geometry.dominant_index_from_doppler(f, params, order, oversample)
        if cell in serving_hat:
            alpha_hat = geometry.local_offset(perturbed, cell, layout)
            q_hat[cell] = geometry.dominant_index_from_position(
                alpha_hat, layout, span, order, oversample
            )
    frame_power = (
        cfg.pilots * cfg.pilot_power + (cfg.subcarriers - cfg.pilots)
    ) / cfg.subcarriers
    return AntennaView(
        position=position,
        serving=serving,
        serving_hat=serving_hat,
        alphas=alphas,
        dopplers=dopplers,
        q_true=q_true,
        q_hat=q_hat,
        noise_scale=len(serving) * frame_power,
    )


def _design_pattern(cfg: ExperimentConfig) -> np.ndarray:
    """Resolve the proposed pilot pattern per the configured design rule."""
    if cfg.pilot_design == "file":
        with open(cfg.pilot_pattern_file) as fh:
            data = json.load(fh)
        indices = np.asarray(data["pattern"] if isinstance(data, dict) else data)
        return pilot_design.PilotPattern(cfg.subcarriers, indices).indices
    if cfg.pilot_design == "equidistant":
        return pilot_design.equidistant_pattern(cfg.subcarriers, cfg.pilots).indices
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_EXP_DESIGN, 0)))
    pattern = pilot_design.design_pilots(
        cfg.subcarriers,
        cfg.delay_taps,
        cfg.pilots,
        cfg.design_sweeps,
        pilot_design.CoherenceParams(cfg.coherence_delta),
        rng,
    )
    return pattern.indices


def _design_preset(
    cfg: ExperimentConfig, antennas: tuple[AntennaView, ...], bem_cfg: bem.BemConfig
) -> PresetDesign:
    """Guard-split baseline: a designed pattern of 48 pilots split into two
    orthogonal halves, with guards protecting each half's shifted images."""
    total = 48
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_EXP_DESIGN, 1)))
    full = pilot_design.design_pilots(
        cfg.subcarriers,
        cfg.delay_taps,
        total,
        cfg.design_sweeps,
        pilot_design.CoherenceParams(cfg.coherence_delta),
        rng,
    ).indices
    cells = sorted({c for ant in antennas for c in ant.serving}) or [1]
    patterns: dict[int, np.ndarray] = {}
    for i, cell in enumerate(cells[:2]):
        patterns[cell] = full[i::2]
    for cell in cells[2:]:
        patterns[cell] = patterns[cells[0]]
    shifts: dict[tuple[int, int], int] = {}
    for r, ant in enumerate(antennas):
        for cell in ant.serving:
            if cell in ant.q_hat:
                shifts[(r, cell)] = _round_half_up(bem_cfg.bin_offset(ant.q_hat[cell]))
    guards: dict[int, set[int]] = {cell: set() for cell in patterns}
    K = cfg.subcarriers
    for r, ant in enumerate(antennas):
        for t in ant.serving:
            for nu in ant.serving:
                if nu == t or (r, t) not in shifts or (r, nu) not in shifts:
                    continue
                shifted = (patterns[t] + shifts[(r, t)] - shifts[(r, nu)]) % K
                guards[nu].update(int(i) for i in shifted)
    guard_sets: dict[int, np.ndarray] = {}
    detect: dict[int, np.ndarray] = {}
    for cell, pattern in patterns.items():
        own = set(int(i) for i in pattern)
        g = np.array(sorted(guards[cell] - own), dtype=np.int64)
        guard_sets[cell] = g
        blocked = own | set(int(i) for i in g)
        detect[cell] = np.array(sorted(set(range(K)) - blocked), dtype=np.int64)
    return PresetDesign(
        pilot_patterns=patterns, guard_sets=guard_sets, detect_patterns=detect, shifts=shifts
    )


def _awgn_position(cfg: ExperimentConfig, layout: geometry.CellLayout) -> float:
    """A track position whose antennas all see exactly one cell."""
    candidates = [layout.d_s / 2.0] + [layout.d0 * f for f in (0.5, 0.75, 1.0)]
    offsets = cfg.antenna_offsets_m
    for pos in candidates:
        if all(len(geometry.serving_cells(pos + a, layout)) == 1 for a in offsets):
            return pos
    raise ValueError("no single-cell calibration position found")


def build_point_context(
    cfg: ExperimentConfig,
    speed_kmh: float | None = None,
    track_position: float | None = None,
    with_preset: bool = False,
    with_awgn: bool = False,
) -> PointContext:
    speed_kmh = cfg.speed_kmh if speed_kmh is None else speed_kmh
    track_position = cfg.track_position_m if track_position is None else track_position
    layout = cfg.layout()
    params = cfg.doppler_params()
    bem_cfg = cfg.bem_config(speed_kmh)
    basis = bem.build_basis(bem_cfg)
    fourier = bem.partial_fourier(cfg.subcarriers, cfg.delay_taps)
    pattern = _design_pattern(cfg)
    spec = ofdm.FrameSpec(
        num_subcarriers=cfg.subcarriers,
        pilot_pattern=pattern,
        pilot_power=cfg.pilot_power,
        pilot_phase=cfg.pilot_phase,
    )
    state = geometry.TrainState(
        track_position=track_position,
        speed=cfg.speed_mps(speed_kmh),
        antenna_offsets=cfg.antenna_offsets_m,
        train_length=cfg.train_length_m,
    )
    antennas = tuple(
        _antenna_view(cfg, layout, params, pos, state.speed, bem_cfg.order)
        for pos in state.antenna_positions()
    )
    active = tuple(sorted({c for ant in antennas for c in ant.serving}))
    preset = _design_preset(cfg, antennas, bem_cfg) if with_preset else None
    awgn_antennas: tuple[AntennaView, ...] = ()
    if with_awgn:
        pos0 = _awgn_position(cfg, layout)
        awgn_antennas = tuple(
            _antenna_view(cfg, layout, params, pos0 + a, state.speed, bem_cfg.order)
            for a in cfg.antenna_offsets_m
        )
    return PointContext(
        cfg=cfg,
        speed_kmh=speed_kmh,
        track_position=track_position,
        bem_cfg=bem_cfg,
        basis=basis,
        fourier=fourier,
        pattern=pattern,
        frame_spec=spec,
        antennas=antennas,
        active_cells=active,
        preset=preset,
        awgn_antennas=awgn_antennas,
    )


# ---------------------------------------------------------------------------
# per-trial simulation
# ---------------------------------------------------------------------------


def _trial_rng(cfg: ExperimentConfig, experiment: int, point: int, trial: int):
    return np.random.default_rng(
        np.random.SeedSequence(cfg.seed, spawn_key=(experiment, point, trial))
    )


def _draw_links(ctx: PointContext, antennas, rng) -> dict[tuple[int, int], channel.SparseBemChannel]:
    links = {}
    for r, ant in enumerate(antennas):
        for cell in ant.serving:
            links[(r, cell)] = channel.sample_channel(
                rng,
                ctx.cfg.delay_taps,
                ctx.cfg.sparsity,
                ant.q_true[cell],
                ant.dopplers[cell],
                ctx.cfg.power_delay_profile,
            )
    return links


def _link_ops(ctx: PointContext, links):
    """Per-link (phase, response) pairs for the fast matrix-free pipeline."""
    ops = {}
    for key, ch in links.items():
        phase = channel.channel_phase(
            ch, ctx.basis, ctx.cfg.channel_mode, ctx.cfg.packet_duration_s
        )
        ops[key] = (phase, channel.freq_response(ch, ctx.fourier))
    return ops


def _components(ctx: PointContext, antennas, ops, frames):
    """Ground-truth per-cell received components for every antenna."""
    out = []
    for r, ant in enumerate(antennas):
        per_cell = {
            cell: channel.apply_channel(*ops[(r, cell)], frames[cell].symbols)
            for cell in ant.serving
        }
        out.append(per_cell)
    return out


def _estimate_antenna(
    ctx: PointContext,
    ant: AntennaView,
    observations: dict[int, np.ndarray],
    frames,
    solver: str,
    sigma2: float,
    bpdn_cache: dict | None = None,
) -> estimator.EstimateResult:
    system = estimator.build_measurement(
        frames, {cell: ctx.pattern for cell in observations}, ctx.fourier, observations
    )
    if solver == "omp":
        sparsity = ctx.cfg.omp_sparsity or ctx.cfg.sparsity
        tol = estimator.omp_residual_tol(ctx.cfg.pilots, sparsity, math.sqrt(sigma2))
        return estimator.solve_omp(
            system,
            sparsity=sparsity,
            residual_tol=tol,
            max_atoms=min(2 * sparsity, ctx.cfg.pilots),
        )
    if solver == "bp":
        eps = estimator.bpdn_epsilon(ctx.cfg.pilots, math.sqrt(sigma2)) * ctx.cfg.bpdn_epsilon_scale
        return estimator.solve_bpdn(
            system, eps, max_iter=ctx.cfg.bpdn_max_iter, factor_cache=bpdn_cache
        )
    if solver == "ls":
        return estimator.solve_ls(system)
    raise ValueError(f"unknown solver {solver!r}")


def _stream_gaps(
    ctx: PointContext, ant: AntennaView, ops, r: int, result: estimator.EstimateResult
) -> list[float]:
    """Per-stream normalized squared Frobenius channel errors."""
    gaps = []
    K = ctx.cfg.subcarriers
    for cell in ant.serving:
        phase_true, resp_true = ops[(r, cell)]
        coeff = result.coefficient(cell, ctx.cfg.delay_taps)
        resp_est = ctx.fourier.response(coeff)
        q_hat = ant.q_hat.get(cell, ant.q_true[cell])
        phase_est = ctx.basis.vector(q_hat)
        gap = channel.frobenius_gap_sq(phase_true, resp_true, phase_est, resp_est)
        gaps.append(gap / (K * K))
    return gaps


def _eliminated_observations(ctx, ant, rx, bank, mode):
    obs = {}
    for cell in ant.serving:
        if cell not in ant.q_hat:
            continue  # receiver believes the cell is out of range
        q_hat = ant.q_hat[cell]
        selected = eliminator.select_component(rx, cell, q_hat, bank, mode, ctx.pattern)
        obs[cell] = eliminator.ici_eliminate(selected, q_hat, bank)
    return obs


def _mse_trial(ctx: PointContext, sigma2_scale: float, rng) -> dict[str, list[float]]:
    """One Monte Carlo trial of every MSE scheme; returns per-stream gaps."""
    cfg = ctx.cfg
    bank = ctx.bank()
    mode = cfg.elimination()
    links = _draw_links(ctx, ctx.antennas, rng)
    ops = _link_ops(ctx, links)
    frames = {cell: ofdm.build_frame(rng, ctx.frame_spec) for cell in ctx.active_cells}
    genie_frames = {cell: frames[cell].with_zero_data() for cell in ctx.active_cells}
    noises = [
        ofdm.complex_noise(rng, cfg.subcarriers, ant.noise_scale * sigma2_scale)
        for ant in ctx.antennas
    ]
    comps = _components(ctx, ctx.antennas, ops, frames)
    genie_comps = _components(ctx, ctx.antennas, ops, genie_frames)
    out: dict[str, list[float]] = {scheme: [] for scheme in MSE_SCHEMES}
    bpdn_cache: dict = {}
    for r, ant in enumerate(ctx.antennas):
        if not ant.serving:
            continue
        noise = noises[r]
        sigma2 = ant.noise_scale * sigma2_scale
        rx = eliminator.ReceivedComponents(
            composite=sum(comps[r].values()) + noise, per_cell=comps[r], noise=noise
        )
        obs = _eliminated_observations(ctx, ant, rx, bank, mode)
        for scheme, solver in (("prop-omp", "omp"), ("prop-bp", "bp"), ("ls", "ls")):
            result = _estimate_antenna(ctx, ant, obs, frames, solver, sigma2, bpdn_cache)
            out[scheme].extend(_stream_gaps(ctx, ant, ops, r, result))
        raw = {cell: rx.composite for cell in ant.serving if cell in ant.q_hat}
        result = _estimate_antenna(ctx, ant, raw, frames, "omp", sigma2)
        out["no-elim"].extend(_stream_gaps(ctx, ant, ops, r, result))
        rx_genie = eliminator.ReceivedComponents(
            composite=sum(genie_comps[r].values()) + noise,
            per_cell=genie_comps[r],
            noise=noise,
        )
        obs_genie = _eliminated_observations(ctx, ant, rx_genie, bank, mode)
        result = _estimate_antenna(ctx, ant, obs_genie, genie_frames, "omp", sigma2)
        out["ici-free"].extend(_stream_gaps(ctx, ant, ops, r, result))
    return out


def _bits_for_positions(spec: ofdm.FrameSpec, positions: np.ndarray) -> np.ndarray:
    """Bit indices of ``payload_bits`` carried on the given data subcarriers."""
    lookup = {int(sc): i for i, sc in enumerate(spec.data_pattern)}
    slots = np.array([lookup[int(p)] for p in positions], dtype=np.int64)
    return np.stack([2 * slots, 2 * slots + 1], axis=1).reshape(-1)


def _count_errors(
    detected: np.ndarray, frame: ofdm.TxFrame, positions: np.ndarray
) -> tuple[int, int]:
    idx = _bits_for_positions(frame.spec, positions)
    truth = frame.payload_bits[idx]
    return int(np.count_nonzero(detected != truth)), int(truth.size)


def _ber_trial(ctx: PointContext, sigma2_scale: float, rng) -> dict[str, tuple[int, int]]:
    """One BER trial for all detection schemes; returns (errors, bits)."""
    cfg = ctx.cfg
    K = cfg.subcarriers
    bank = ctx.bank()
    mode = cfg.elimination()
    links = _draw_links(ctx, ctx.antennas, rng)
    ops = _link_ops(ctx, links)
    frames = {cell: ofdm.build_frame(rng, ctx.frame_spec) for cell in ctx.active_cells}
    preset = ctx.preset
    preset_frames = {}
    if preset is not None:
        for cell in ctx.active_cells:
            spec = ofdm.FrameSpec(
                num_subcarriers=K,
                pilot_pattern=preset.pilot_patterns[cell],
                pilot_power=cfg.pilot_power,
                pilot_phase=cfg.pilot_phase,
            )
            preset_frames[cell] = ofdm.build_frame(rng, spec).with_guards(
                preset.guard_sets[cell]
            )
    awgn_frames = {}
    awgn_cells = tuple(sorted({c for ant in ctx.awgn_antennas for c in ant.serving}))
    for cell in awgn_cells:
        awgn_frames[cell] = ofdm.build_frame(rng, ctx.frame_spec)
    noises = [
        ofdm.complex_noise(rng, K, ant.noise_scale * sigma2_scale) for ant in ctx.antennas
    ]
    awgn_noises = [
        ofdm.complex_noise(rng, K, ant.noise_scale * sigma2_scale)
        for ant in ctx.awgn_antennas
    ]
    comps = _components(ctx, ctx.antennas, ops, frames)
    totals = {scheme: [0, 0] for scheme in BER_SCHEMES}

    def add(scheme: str, errors: int, bits: int) -> None:
        totals[scheme][0] += errors
        totals[scheme][1] += bits

    data_pattern = ctx.frame_spec.data_pattern
    for r, ant in enumerate(ctx.antennas):
        if not ant.serving:
            continue
        noise = noises[r]
        sigma2 = ant.noise_scale * sigma2_scale
        rx = eliminator.ReceivedComponents(
            composite=sum(comps[r].values()) + noise, per_cell=comps[r], noise=noise
        )
        obs = _eliminated_observations(ctx, ant, rx, bank, mode)
        result = _estimate_antenna(ctx, ant, obs, frames, "omp", sigma2)
        for cell in ant.serving:
            if cell not in obs:
                continue
            resp_est = ctx.fourier.response(result.coefficient(cell, cfg.delay_taps))
            bits, _ = ofdm.zf_detect(obs[cell], resp_est, data_pattern)
            add("prop-omp", *_count_errors(bits, frames[cell], data_pattern))
            _, resp_true = ops[(r, cell)]
            bits_csi, _ = ofdm.zf_detect(obs[cell], resp_true, data_pattern)
            add("perfect-csi", *_count_errors(bits_csi, frames[cell], data_pattern))
        if preset is not None:
            pre_comps = {
                cell: channel.apply_channel(*ops[(r, cell)], preset_frames[cell].symbols)
                for cell in ant.serving
            }
            for cell in ant.serving:
                if (r, cell) not in preset.shifts:
                    continue
                branch = pre_comps[cell] + noise
                unshifted = np.roll(branch, -preset.shifts[(r, cell)])
                system = estimator.build_measurement(
                    preset_frames,
                    {cell: preset.pilot_patterns[cell]},
                    ctx.fourier,
                    {cell: unshifted},
                )
                n_pilots = preset.pilot_patterns[cell].size
                pres = estimator.solve_omp(
                    system,
                    sparsity=cfg.sparsity,
                    residual_tol=estimator.omp_residual_tol(
                        n_pilots, cfg.sparsity, math.sqrt(sigma2)
                    ),
                    max_atoms=min(2 * cfg.sparsity, n_pilots),
                )
                resp_est = ctx.fourier.response(pres.coefficient(cell, cfg.delay_taps))
                detect_at = preset.detect_patterns[cell]
                bits, _ = ofdm.zf_detect(unshifted, resp_est, detect_at)
                add("guard-split", *_count_errors(bits, preset_frames[cell], detect_at))
    # flat-channel calibration streams: deterministic unit tap at delay zero
    for r, ant in enumerate(ctx.awgn_antennas):
        noise = awgn_noises[r]
        flat = {}
        for cell in ant.serving:
            ch = channel.SparseBemChannel(
                support=np.array([0]),
                gains=np.array([1.0 + 0.0j]),
                dominant_index=ant.q_true[cell],
                num_taps=cfg.delay_taps,
                doppler_hz=ant.dopplers[cell],
            )
            phase = channel.channel_phase(
                ch, ctx.basis, channel.STRICT_BEM, cfg.packet_duration_s
            )
            resp = channel.freq_response(ch, ctx.fourier)
            flat[cell] = (phase, resp)
        per_cell = {
            cell: channel.apply_channel(*flat[cell], awgn_frames[cell].symbols)
            for cell in ant.serving
        }
        rx = eliminator.ReceivedComponents(
            composite=sum(per_cell.values()) + noise, per_cell=per_cell, noise=noise
        )
        for cell in ant.serving:
            q = ant.q_true[cell]
            selected = eliminator.select_component(
                rx, cell, q, bank, eliminator.EliminationMode(eliminator.ORACLE)
            )
            ybar = eliminator.ici_eliminate(selected, q, bank)
            bits, _ = ofdm.zf_detect(ybar, flat[cell][1], data_pattern)
            add("awgn-csi", *_count_errors(bits, awgn_frames[cell], data_pattern))
    return {scheme: (v[0], v[1]) for scheme, v in totals.items()}


# ---------------------------------------------------------------------------
# trial execution / aggregation
# ---------------------------------------------------------------------------


def _mse_chunk(args) -> list[dict[str, list[float]]]:
    ctx, experiment, point, sigma2_scale, lo, hi = args
    return [
        _mse_trial(ctx, sigma2_scale, _trial_rng(ctx.cfg, experiment, point, t))
        for t in range(lo, hi)
    ]


def _ber_chunk(args) -> list[dict[str, tuple[int, int]]]:
    ctx, experiment, point, sigma2_scale, lo, hi = args
    return [
        _ber_trial(ctx, sigma2_scale, _trial_rng(ctx.cfg, experiment, point, t))
        for t in range(lo, hi)
    ]


def _run_trials(worker, ctx: PointContext, experiment: int, point: int, sigma2_scale: float):
    cfg = ctx.cfg
    n = cfg.trials
    if cfg.threads <= 1:
        return worker((ctx, experiment, point, sigma2_scale, 0, n))
    bounds = np.linspace(0, n, cfg.threads + 1).astype(int)
    chunks = [
        (ctx, experiment, point, sigma2_scale, int(lo), int(hi))
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    results = []
    with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
        for part in pool.map(worker, chunks):
            results.extend(part)
    return results


def _snr_to_scale(snr_db: float) -> float:
    """Noise variance per unit received power; infinite SNR means noiseless."""
    if math.isinf(snr_db):
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


def _geometry_rows(
    cfg: ExperimentConfig,
    experiment: str,
    sweep_var: str,
    sweep_value: float,
    ctx: PointContext,
    reference: AntennaView,
) -> list[ResultRow]:
    rows = []

    def row(metric: str, value: float, scheme: str = "geometry") -> ResultRow:
        return ResultRow(
            experiment=experiment,
            scheme=scheme,
            bem=cfg.bem_kind,
            mode=cfg.elimination_mode,
            sweep_var=sweep_var,
            sweep_value=sweep_value,
            metric=metric,
            value=value,
            trials=cfg.trials,
            seed=cfg.seed,
            config_hash=cfg.config_hash(),
        )

    rows.append(row("serving_cells", float(len(reference.serving))))
    for cell in reference.serving:
        rows.append(row(f"doppler_hz_cell{cell}", reference.dopplers[cell]))
        rows.append(row(f"q_star_cell{cell}", float(reference.q_true[cell])))
    rows.append(row("bem_order", float(ctx.bem_cfg.order)))
    separable = all(
        len({ant.q_hat[c] for c in ant.serving if c in ant.q_hat}) == len(ant.serving)
        for ant in ctx.antennas
        if len(ant.serving) > 1
    )
    rows.append(row("mci_separable", 1.0 if separable else 0.0))
    return rows


def _reference_antenna(ctx: PointContext) -> AntennaView:
    for offset, ant in zip(ctx.cfg.antenna_offsets_m, ctx.antennas):
        if offset == 0.0:
            return ant
    return ctx.antennas[-1]


def _mse_rows(
    cfg: ExperimentConfig,
    experiment: str,
    sweep_var: str,
    sweep_value: float,
    trials_out: list[dict[str, list[float]]],
    schemes,
) -> list[ResultRow]:
    rows = []
    for scheme in schemes:
        gaps: list[float] = []
        for trial in trials_out:
            gaps.extend(trial[scheme])
        value = math.fsum(gaps) / len(gaps) if gaps else math.nan
        rows.append(
            ResultRow(
                experiment=experiment,
                scheme=scheme,
                bem=cfg.bem_kind,
                mode=cfg.elimination_mode,
                sweep_var=sweep_var,
                sweep_value=sweep_value,
                metric="mse",
                value=value,
                trials=cfg.trials,
                seed=cfg.seed,
                config_hash=cfg.config_hash(),
            )
        )
    return rows


def run_mse_vs_snr(cfg: ExperimentConfig) -> list[ResultRow]:
    """Channel-estimation MSE versus SNR at the configured track position."""
    ctx = build_point_context(cfg)
    rows: list[ResultRow] = []
    for point, snr_db in enumerate(cfg.snr_grid_db):
        trials_out = _run_trials(_mse_chunk, ctx, _EXP_MSE_SNR, point, _snr_to_scale(snr_db))
        rows.extend(_mse_rows(cfg, "mse_snr", "snr_db", snr_db, trials_out, MSE_SCHEMES))
    return rows


def run_mse_vs_position(cfg: ExperimentConfig, snr_db: float = 25.0) -> list[ResultRow]:
    """Proposed-method MSE and Doppler profile along the track."""
    rows: list[ResultRow] = []
    scale = _snr_to_scale(snr_db)
    for point, position in enumerate(cfg.position_grid_m):
        ctx = build_point_context(cfg, track_position=position)
        trials_out = _run_trials(_mse_chunk, ctx, _EXP_MSE_POSITION, point, scale)
        rows.extend(
            _mse_rows(cfg, "mse_position", "position_m", position, trials_out, ("prop-omp",))
        )
        reference = _antenna_at_position(cfg, ctx, position)
        rows.extend(_geometry_rows(cfg, "mse_position", "position_m", position, ctx, reference))
    return rows


def _antenna_at_position(cfg: ExperimentConfig, ctx: PointContext, position: float) -> AntennaView:
    layout = cfg.layout()
    params = cfg.doppler_params()
    return _antenna_view(cfg, layout, params, position, cfg.speed_mps(ctx.speed_kmh), ctx.bem_cfg.order)


def run_mse_vs_velocity(cfg: ExperimentConfig, snr_db: float = 20.0) -> list[ResultRow]:
    """Proposed-method MSE versus train speed at the configured position."""
    rows: list[ResultRow] = []
    scale = _snr_to_scale(snr_db)
    for point, speed in enumerate(cfg.velocity_grid_kmh):
        ctx = build_point_context(cfg, speed_kmh=speed)
        trials_out = _run_trials(_mse_chunk, ctx, _EXP_MSE_VELOCITY, point, scale)
        rows.extend(
            _mse_rows(cfg, "mse_velocity", "velocity_kmh", speed, trials_out, ("prop-omp",))
        )
        rows.extend(
            _geometry_rows(cfg, "mse_velocity", "velocity_kmh", speed, ctx, _reference_antenna(ctx))
        )
    return rows


def run_ber_vs_snr(cfg: ExperimentConfig) -> list[ResultRow]:
    """Bit error rate versus SNR for the detection schemes."""
    ctx = build_point_context(cfg, with_preset=True, with_awgn=True)
    rows: list[ResultRow] = []
    for point, snr_db in enumerate(cfg.snr_grid_db):
        trials_out = _run_trials(_ber_chunk, ctx, _EXP_BER, point, _snr_to_scale(snr_db))
        for scheme in BER_SCHEMES:
            errors = sum(t[scheme][0] for t in trials_out)
            bits = sum(t[scheme][1] for t in trials_out)
            common = dict(
                experiment="ber_snr",
                scheme=scheme,
                bem=cfg.bem_kind,
                mode=cfg.elimination_mode,
                sweep_var="snr_db",
                sweep_value=snr_db,
                trials=cfg.trials,
                seed=cfg.seed,
                config_hash=cfg.config_hash(),
            )
            rows.append(ResultRow(metric="ber", value=errors / bits if bits else math.nan, **common))
            rows.append(ResultRow(metric="bits", value=float(bits), **common))
    return rows


def run_pilot_design(cfg: ExperimentConfig) -> tuple[np.ndarray, list[ResultRow]]:
    """Design the pilot pattern and report its coherence against equidistant."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_EXP_DESIGN, 0)))
    params = pilot_design.CoherenceParams(cfg.coherence_delta)
    pattern = pilot_design.design_pilots(
        cfg.subcarriers, cfg.delay_taps, cfg.pilots, cfg.design_sweeps, params, rng
    )
    equi = pilot_design.equidistant_pattern(cfg.subcarriers, cfg.pilots)
    mu_designed = pilot_design.pattern_coherence(pattern, cfg.delay_taps, params)
    mu_equi = pilot_design.pattern_coherence(equi, cfg.delay_taps, params)
    common = dict(
        experiment="design_pilots",
        scheme="alg1",
        bem=cfg.bem_kind,
        mode=cfg.elimination_mode,
        sweep_var="pattern",
        sweep_value=0.0,
        trials=cfg.trials,
        seed=cfg.seed,
        config_hash=cfg.config_hash(),
    )
    rows = [
        ResultRow(metric="coherence_designed", value=mu_designed, **common),
        ResultRow(metric="coherence_equidistant", value=mu_equi, **common),
        ResultRow(metric="pilot_count", value=float(len(pattern)), **common),
    ]
    return pattern.indices, rows


def run_diagnose_elimination(cfg: ExperimentConfig, snr_db: float = 25.0) -> list[ResultRow]:
    """Average pilot-row power split before and after elimination.

    The pre-elimination split uses the exact column decomposition on the
    dense channel matrices; the post-elimination splits score each
    pipeline stage against the ideal pilot observation.
    """
    ctx = build_point_context(cfg)
    scale = _snr_to_scale(snr_db)
    bank = ctx.bank()
    modes = [
        ("none", None),
        ("oracle", eliminator.EliminationMode(eliminator.ORACLE)),
        ("physical", eliminator.EliminationMode(eliminator.PHYSICAL, cfg.effective_band_radius())),
    ]
    sums: dict[tuple[str, int], list[list[float]]] = {}
    for point in range(1):
        for t in range(cfg.trials):
            rng = _trial_rng(cfg, _EXP_DIAGNOSE, point, t)
            links = _draw_links(ctx, ctx.antennas, rng)
            ops = _link_ops(ctx, links)
            frames = {cell: ofdm.build_frame(rng, ctx.frame_spec) for cell in ctx.active_cells}
            noises = [
                ofdm.complex_noise(rng, cfg.subcarriers, ant.noise_scale * scale)
                for ant in ctx.antennas
            ]
            comps = _components(ctx, ctx.antennas, ops, frames)
            for r, ant in enumerate(ctx.antennas):
                dense = {
                    cell: channel.freq_channel(
                        channel.time_taps(
                            links[(r, cell)],
                            ctx.basis,
                            cfg.channel_mode,
                            cfg.packet_duration_s,
                        )
                    ).matrix
                    for cell in ant.serving
                }
                for mode_name, mode in modes:
                    for cell in ant.serving:
                        if mode is None:
                            dec = ofdm.decompose_interference(
                                dense,
                                frames,
                                {c: ctx.pattern for c in ant.serving},
                                cell,
                                noises[r],
                            )
                        else:
                            q_hat = ant.q_hat.get(cell)
                            if q_hat is None:
                                continue
                            rx_own = eliminator.ReceivedComponents(
                                composite=comps[r][cell], per_cell={cell: comps[r][cell]},
                                noise=np.zeros(cfg.subcarriers, dtype=complex),
                            )
                            own_sel = eliminator.select_component(
                                rx_own, cell, q_hat, bank, mode, ctx.pattern
                            )
                            others_vec = sum(
                                (comps[r][c] for c in ant.serving if c != cell),
                                np.zeros(cfg.subcarriers, dtype=complex),
                            )
                            if mode.kind == eliminator.ORACLE:
                                others_sel = np.zeros(cfg.subcarriers, dtype=complex)
                            else:
                                rx_oth = eliminator.ReceivedComponents(
                                    composite=others_vec, per_cell={}, noise=others_vec * 0
                                )
                                others_sel = eliminator.select_component(
                                    rx_oth, cell, q_hat, bank, mode, ctx.pattern
                                )
                            noise_sel = (
                                noises[r]
                                if mode.kind == eliminator.ORACLE
                                else eliminator.select_component(
                                    eliminator.ReceivedComponents(
                                        composite=noises[r], per_cell={}, noise=noises[r] * 0
                                    ),
                                    cell,
                                    q_hat,
                                    bank,
                                    mode,
                                    ctx.pattern,
                                )
                            )
                            ideal = ops[(r, cell)][1] * frames[cell].symbols
                            dec = eliminator.residual_report(
                                ideal,
                                eliminator.ici_eliminate(own_sel, q_hat, bank),
                                eliminator.ici_eliminate(others_sel, q_hat, bank),
                                eliminator.ici_eliminate(noise_sel, q_hat, bank),
                                ctx.pattern,
                            )
                        key = (mode_name, cell)
                        sums.setdefault(key, []).append(
                            [
                                dec.desired_power,
                                dec.self_ici_power,
                                dec.mci_power,
                                dec.noise_power,
                            ]
                        )
    rows: list[ResultRow] = []
    for (mode_name, cell), values in sorted(sums.items()):
        means = [math.fsum(col) / len(values) for col in zip(*values)]
        dec = ofdm.InterferenceDecomposition(*means)
        for metric, value in dec.to_db().items():
            rows.append(
                ResultRow(
                    experiment="diagnose_elimination",
                    scheme=f"cell{cell}",
                    bem=cfg.bem_kind,
                    mode=mode_name,
                    sweep_var="position_m",
                    sweep_value=ctx.track_position,
                    metric=metric,
                    value=value,
                    trials=cfg.trials,
                    seed=cfg.seed,
                    config_hash=cfg.config_hash(),
                )
            )
    return rows
