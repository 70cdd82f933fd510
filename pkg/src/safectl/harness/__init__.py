"""Experiment harness: configuration, episode runner, metrics, sweeps, benchmarking and export."""

from .build import build_controller, build_env, build_filter, build_model, build_task
from .config import (
    ExperimentConfig,
    apply_overrides,
    config_from_dict,
    dump_config,
    load_config,
    load_schema,
    loads_config,
)
from .experiment import (
    BenchResult,
    SweepPoint,
    axis_config,
    benchmark_throughput,
    robustness_sweep,
    run_experiment,
    sweep_trend,
)
from .export import export_results, trace_columns, trace_csv, violation_fraction_from_csv
from .metrics import MetricsReport, aggregate, compute_metrics, tracking_rmse
from .runner import EpisodeTrace, run_episode

__all__ = [
    "BenchResult",
    "EpisodeTrace",
    "ExperimentConfig",
    "MetricsReport",
    "SweepPoint",
    "aggregate",
    "apply_overrides",
    "axis_config",
    "benchmark_throughput",
    "build_controller",
    "build_env",
    "build_filter",
    "build_model",
    "build_task",
    "compute_metrics",
    "config_from_dict",
    "dump_config",
    "export_results",
    "load_config",
    "load_schema",
    "loads_config",
    "robustness_sweep",
    "run_episode",
    "run_experiment",
    "sweep_trend",
    "trace_columns",
    "trace_csv",
    "tracking_rmse",
    "violation_fraction_from_csv",
]
