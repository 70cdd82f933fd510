"""Multi-episode runs, robustness sweeps and throughput benchmarking."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from ..controllers import ZeroController
from .build import build_env
from .config import ExperimentConfig, apply_overrides
from .metrics import aggregate, compute_metrics
from .runner import EpisodeTrace, episode_index, run_episode

AXES = ("pole_length", "action_noise")


def _run_one(args):
    cfg, seed, episode = args
    return run_episode(cfg, seed, episode)


def _map(jobs, workers: int):
    """Run ``(cfg, seed, episode)`` jobs; results come back in job order regardless of worker count."""
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def run_experiment(cfg: ExperimentConfig, workers: int | None = None):
    """All ``(seed, episode)`` pairs of ``cfg``; returns ``(traces, reports)`` in seed-major order."""
    workers = cfg.output["workers"] if workers is None else workers
    jobs = [(cfg, s, e) for s, e in episode_index(cfg)]
    traces = _map(jobs, workers)
    return traces, [compute_metrics(t) for t in traces]


def axis_config(cfg: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    """The configuration of one sweep grid point, expressed as ordinary overrides.

    ``pole_length`` scales the true pole length by ``value`` (the controller's
    prior keeps the nominal length); ``action_noise`` adds white noise of
    standard deviation ``value`` to every input channel.
    """
    if axis == "pole_length":
        if cfg.system_name != "cartpole":
            raise ValueError("the pole_length axis needs the cart-pole")
        nominal = cfg.system.get("params", {}).get("l", 0.5)
        return apply_overrides(cfg, [(["randomization", "param_values", "l"], nominal * float(value))])
    if axis == "action_noise":
        noise = {"target": "action", "kind": "white_noise", "std": [float(value)]}
        return apply_overrides(cfg, [(["disturbances"], list(cfg.disturbances) + [noise])])
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {AXES}")


@dataclass
class SweepPoint:
    value: float
    reports: list
    summary: dict


def robustness_sweep(cfg: ExperimentConfig, axis: str, grid, seeds=None, workers: int | None = None) -> list:
    """Cross product of grid values and seeds; one ``SweepPoint`` per value, in grid order."""
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError("sweep grid is empty")
    seeds = list(cfg.seeds if seeds is None else seeds)
    workers = cfg.output["workers"] if workers is None else workers
    configs = [axis_config(cfg, axis, v) for v in grid]
    jobs = [(c, s, e) for c in configs for s in seeds for e in range(cfg.episodes)]
    traces = _map(jobs, workers)
    per_point = len(seeds) * cfg.episodes
    out = []
    for i, v in enumerate(grid):
        reports = [compute_metrics(t) for t in traces[i * per_point : (i + 1) * per_point]]
        out.append(SweepPoint(v, reports, aggregate(reports)))
    return out


def sweep_trend(points) -> float:
    """Spearman rank correlation between grid value and mean RMSE."""
    vals = [p.value for p in points]
    rmse = [p.summary["rmse_mean"] for p in points]
    return float(spearmanr(vals, rmse).statistic)


@dataclass(frozen=True)
class BenchResult:
    control_steps: int
    physics_steps: int
    simulated_seconds: float
    wall_seconds: float
    logging: bool

    @property
    def realtime_factor(self) -> float:
        return self.simulated_seconds / self.wall_seconds

    @property
    def physics_steps_per_second(self) -> float:
        return self.physics_steps / self.wall_seconds

    def to_dict(self) -> dict:
        return {
            "control_steps": self.control_steps,
            "physics_steps": self.physics_steps,
            "simulated_seconds": self.simulated_seconds,
            "wall_seconds": self.wall_seconds,
            "logging": self.logging,
            "realtime_factor": self.realtime_factor,
            "physics_steps_per_second": self.physics_steps_per_second,
        }


def benchmark_throughput(cfg: ExperimentConfig, duration: float = 10.0, logging: bool = True,
                         use_controller: bool = False) -> BenchResult:
    """Simulate at least ``duration`` seconds and time it.

    By default the reference input is applied open loop; ``use_controller``
    runs the configured controller instead. With ``logging`` every step goes
    through the full trace recorder.
    """
    env = build_env(cfg)
    sim = 0.0
    steps = 0
    episode = 0
    wall0 = time.perf_counter()
    while sim < duration:
        if logging:
            ctrl = None if use_controller else ZeroController()
            tr: EpisodeTrace = run_episode(cfg, cfg.seeds[0], episode, controller=ctrl, env=env)
            n = tr.steps
        else:
            n = _bare_episode(env, cfg.seeds[0], episode)
        steps += n
        sim += n * env.dt
        episode += 1
        if n == 0:
            break
    wall = time.perf_counter() - wall0
    return BenchResult(steps, steps * env.substeps, sim, wall, logging)


def _bare_episode(env, seed, episode) -> int:
    ctrl = ZeroController()
    obs, info = env.reset(seed, episode)
    ctrl.reset(info)
    k = 0
    done = False
    while not done:
        done = env.step(ctrl.act(obs, k)).done
        k += 1
    return k


def sweep_table(points, axis: str) -> dict:
    return {
        "axis": axis,
        "points": [
            {"value": p.value, **p.summary, "rmse": [r.rmse for r in p.reports]} for p in points
        ],
        "spearman_rmse": sweep_trend(points) if len(points) > 1 else None,
    }


def grid_from_text(text: str) -> list:
    """``"a,b,c"`` or ``"lo:hi:n"`` (inclusive linspace)."""
    if ":" in text:
        lo, hi, n = text.split(":")
        return [float(v) for v in np.linspace(float(lo), float(hi), int(n))]
    return [float(v) for v in text.split(",") if v.strip()]
