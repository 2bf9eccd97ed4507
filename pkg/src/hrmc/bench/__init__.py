"""Benchmark harness: sweeps, scoring and report output."""

from .experiment import (
    DEFAULT_GRID,
    HIGHRANK,
    LOWRANK,
    ErrorCDF,
    ExperimentResult,
    ExperimentSpec,
    TrialRecord,
    error_cdf,
    network_spec,
    run_experiment,
    score_columns,
    synthetic_spec,
)
from .report import plot_cdf, plot_correct, write_report, write_results

__all__ = [
    "DEFAULT_GRID",
    "HIGHRANK",
    "LOWRANK",
    "ErrorCDF",
    "ExperimentResult",
    "ExperimentSpec",
    "TrialRecord",
    "error_cdf",
    "network_spec",
    "run_experiment",
    "score_columns",
    "synthetic_spec",
    "plot_cdf",
    "plot_correct",
    "write_report",
    "write_results",
]
