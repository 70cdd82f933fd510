"""Episode metrics and their aggregation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..envs.task import TaskKind, TaskSpec, quadratic_cost


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    violation_fraction: float
    cost: float
    completed: bool
    steps: int
    filter_modified_fraction: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def rmse_channels(system: str, task: TaskSpec) -> list:
    """State indices entering the RMSE: x and z for planar tracking, all states otherwise."""
    if system == "quadrotor_2d" and task.kind is TaskKind.TRACKING:
        return [0, 2]
    return list(range(task.n_x))


def tracking_rmse(states, refs, channels) -> float:
    """``sqrt(mean_k |x_k - r_k|^2)`` over the post-reset states ``k = 1..steps`` and the given channels."""
    err = np.asarray(states, dtype=float)[1:, channels] - np.asarray(refs, dtype=float)[1:, channels]
    if err.shape[0] == 0:
        return 0.0
    return math.sqrt(float(np.mean(np.sum(err * err, axis=1))))


def compute_metrics(trace, task: TaskSpec | None = None) -> MetricsReport:
    task = task or trace.task
    steps = trace.steps
    if trace.failed or not np.all(np.isfinite(trace.states)):
        rmse = math.inf
        cost = math.inf
    else:
        rmse = tracking_rmse(trace.states, trace.refs, rmse_channels(trace.system, task))
        cost = quadratic_cost(task, trace.states, trace.u_applied) if steps else 0.0
    viol = float(np.count_nonzero(trace.violations)) / steps if steps else 0.0
    mod = None
    if trace.has_filter:
        mod = float(np.count_nonzero(trace.filter_modified)) / steps if steps else 0.0
    return MetricsReport(rmse, viol, cost, bool(trace.completed), steps, mod)


def _mean_std(values):
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return None, None
    if not np.all(np.isfinite(arr)):
        return math.inf, math.inf
    return float(np.mean(arr)), float(np.std(arr))


def aggregate(reports) -> dict:
    """Deterministic reduction over an ordered list of reports."""
    reports = list(reports)
    out = {"episodes": len(reports), "completed": sum(r.completed for r in reports)}
    for key in ("rmse", "violation_fraction", "cost"):
        mean, std = _mean_std([getattr(r, key) for r in reports])
        out[f"{key}_mean"] = mean
        out[f"{key}_std"] = std
    mods = [r.filter_modified_fraction for r in reports if r.filter_modified_fraction is not None]
    if mods:
        out["filter_modified_fraction_mean"] = float(np.mean(mods))
    return out
