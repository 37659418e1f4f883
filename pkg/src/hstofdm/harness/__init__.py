"""Experiment orchestration: configuration, Monte Carlo sweeps, CSV and
figure emission, and the command line interface."""

from .config import ExperimentConfig, load_config
from .runner import (
    CSV_HEADER,
    ResultRow,
    run_ber_vs_snr,
    run_mse_vs_position,
    run_mse_vs_snr,
    run_mse_vs_velocity,
    run_pilot_design,
    write_csv,
)

__all__ = [
    "CSV_HEADER",
    "ExperimentConfig",
    "ResultRow",
    "load_config",
    "run_ber_vs_snr",
    "run_mse_vs_position",
    "run_mse_vs_snr",
    "run_mse_vs_velocity",
    "run_pilot_design",
    "write_csv",
]
