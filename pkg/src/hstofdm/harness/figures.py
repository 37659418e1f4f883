"""Render result rows to matplotlib figures saved next to the CSV output."""

from __future__ import annotations

import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .runner import ResultRow

_SWEEP_LABELS = {
    "snr_db": "SNR (dB)",
    "position_m": "antenna position (m)",
    "velocity_kmh": "train speed (km/h)",
}


def _series(rows: list[ResultRow], metric: str) -> dict[str, tuple[list, list]]:
    grouped: dict[str, tuple[list, list]] = defaultdict(lambda: ([], []))
    for row in rows:
        if row.metric == metric:
            xs, ys = grouped[row.scheme]
            xs.append(row.sweep_value)
            ys.append(row.value)
    return grouped


def render_figure(rows: list[ResultRow], path: str) -> None:
    """Dispatch on the experiment id and write a PNG summary."""
    if not rows:
        return
    experiment = rows[0].experiment
    if experiment.startswith("mse"):
        _render_metric(rows, path, "mse", log_db=True)
    elif experiment == "ber_snr":
        _render_metric(rows, path, "ber", log_db=False)
    elif experiment == "design_pilots":
        _render_design(rows, path)
    elif experiment == "diagnose_elimination":
        _render_diagnose(rows, path)


def _render_metric(rows: list[ResultRow], path: str, metric: str, log_db: bool) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for scheme, (xs, ys) in sorted(_series(rows, metric).items()):
        order = sorted(range(len(xs)), key=xs.__getitem__)
        xs = [xs[i] for i in order]
        ys = [ys[i] for i in order]
        if log_db:
            ys = [10.0 * math.log10(v) if v > 0 else float("nan") for v in ys]
            ax.plot(xs, ys, marker="o", label=scheme)
        else:
            ax.semilogy(xs, [max(v, 1e-12) for v in ys], marker="o", label=scheme)
    sweep_var = rows[0].sweep_var
    ax.set_xlabel(_SWEEP_LABELS.get(sweep_var, sweep_var))
    ax.set_ylabel("MSE (dB)" if log_db else "BER")
    ax.set_title(f"{rows[0].experiment} ({rows[0].bem.upper()}-BEM, {rows[0].mode})")
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=8)
    doppler = {
        scheme: data
        for scheme, data in _series(rows, "doppler_hz_cell1").items()
    }
    if doppler:
        twin = ax.twinx()
        for cell in (1, 2):
            for scheme, (xs, ys) in _series(rows, f"doppler_hz_cell{cell}").items():
                order = sorted(range(len(xs)), key=xs.__getitem__)
                twin.plot(
                    [xs[i] for i in order],
                    [ys[i] for i in order],
                    linestyle="--",
                    alpha=0.5,
                    label=f"doppler cell {cell}",
                )
        twin.set_ylabel("Doppler (Hz)")
        twin.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _render_design(rows: list[ResultRow], path: str) -> None:
    values = {row.metric: row.value for row in rows}
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    names = ["coherence_designed", "coherence_equidistant"]
    ax.bar(range(len(names)), [values.get(n, float("nan")) for n in names])
    ax.set_xticks(range(len(names)), ["designed", "equidistant"])
    ax.set_ylabel("average coherence")
    ax.set_title("pilot pattern design")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _render_diagnose(rows: list[ResultRow], path: str) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    modes = sorted({row.mode for row in rows})
    metrics = ["desired_db", "ici_db", "mci_db", "noise_db"]
    cells = sorted({row.scheme for row in rows})
    width = 0.8 / len(metrics)
    for ci, cell in enumerate(cells):
        for mi, metric in enumerate(metrics):
            vals = []
            for mode in modes:
                match = [
                    r.value
                    for r in rows
                    if r.mode == mode and r.metric == metric and r.scheme == cell
                ]
                vals.append(match[0] if match else float("nan"))
            xs = [i + mi * width + ci * 0.02 for i in range(len(modes))]
            label = f"{cell} {metric}" if ci == 0 or True else None
            ax.bar(xs, [max(v, -200.0) for v in vals], width=width * 0.9, label=label)
    ax.set_xticks([i + 0.4 for i in range(len(modes))], modes)
    ax.set_ylabel("power (dB)")
    ax.set_title("pilot-row power split by elimination mode")
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
