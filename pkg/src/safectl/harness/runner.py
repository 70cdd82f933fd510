"""Closed-loop episode execution: env, controller and optional filter."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..envs.task import TaskSpec
from ..safefilters.gpmpc import GpMpcController
from .build import build_controller, build_env, build_filter, build_training_policy, training_settings
from .config import ExperimentConfig


@dataclass
class EpisodeTrace:
    """Per-step record of one episode.

    ``states``, ``obs`` and ``refs`` have ``steps + 1`` rows (row 0 is the
    reset state); per-step arrays have ``steps`` rows. ``u_ctrl`` is the
    controller output, ``u_filtered`` what was proposed to the environment
    and ``u_applied`` what acted on the plant after noise and saturation.
    """

    system: str
    seed: int
    episode: int
    states: np.ndarray
    obs: np.ndarray
    refs: np.ndarray
    u_ctrl: np.ndarray
    u_filtered: np.ndarray
    u_applied: np.ndarray
    action_noise: np.ndarray
    forces: np.ndarray
    rewards: np.ndarray
    constraint_values: np.ndarray
    violations: np.ndarray
    filter_modified: np.ndarray
    terminated: bool = False
    failed: bool = False
    error: str | None = None
    wall_time: float = 0.0
    has_filter: bool = False
    task: TaskSpec | None = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict)
    train_seconds: float | None = None
    dt: float = 0.0
    gp_data: tuple | None = field(default=None, repr=False)

    @property
    def steps(self) -> int:
        return self.u_ctrl.shape[0]

    @property
    def completed(self) -> bool:
        return self.error is None and not self.terminated and self.task is not None and self.steps == self.task.L


class _Recorder:
    def __init__(self, L, n_x, n_obs, n_u, n_f, n_c):
        self.states = np.zeros((L + 1, n_x))
        self.obs = np.zeros((L + 1, n_obs))
        self.refs = np.zeros((L + 1, n_x))
        self.u_ctrl = np.zeros((L, n_u))
        self.u_filtered = np.zeros((L, n_u))
        self.u_applied = np.zeros((L, n_u))
        self.action_noise = np.zeros((L, n_u))
        self.forces = np.zeros((L, n_f))
        self.rewards = np.zeros(L)
        self.cvals = np.zeros((L, n_c))
        self.viol = np.zeros(L, dtype=bool)
        self.modified = np.zeros(L, dtype=bool)


def train_gp_controller(cfg: ExperimentConfig, controller: GpMpcController) -> float:
    """Collect transitions on a fresh environment and fit the controller's GP; returns seconds used."""
    t = training_settings(cfg)
    if t["seconds"] <= 0:
        controller.train_seconds = 0.0
        return 0.0
    env = build_env(cfg)
    controller.train(env, build_training_policy(t["policy"]), t["seconds"], seed=t["seed"], excitation=t["excitation"])
    return controller.train_seconds


def run_episode(cfg: ExperimentConfig, seed: int, episode: int = 0, controller=None, filt=None, env=None) -> EpisodeTrace:
    """Run one episode; controller and environment errors end the episode and are stored in the trace.

    ``controller``/``filt``/``env`` default to fresh instances built from ``cfg``.
    """
    wall0 = time.perf_counter()
    env = env or build_env(cfg)
    controller = controller or build_controller(cfg)
    if filt is None:
        filt = build_filter(cfg)
    train_seconds = None
    error = None
    if isinstance(controller, GpMpcController) and controller.gp is None:
        try:
            train_seconds = train_gp_controller(cfg, controller)
        except Exception as exc:  # recorded, not raised
            error = f"{type(exc).__name__}: {exc}"

    task = env.task
    n_x, n_u = task.n_x, task.n_u
    obs, info = env.reset(seed, episode)
    rec = _Recorder(task.L, n_x, obs.size, n_u, env.model.n_force, env.cfg.constraints.n_rows)
    rec.states[0] = info.x0
    rec.obs[0] = obs
    rec.refs[0] = task.ref_state(0)
    k = 0
    terminated = failed = False
    if error is None:
        try:
            controller.reset(info, seed, episode)
            if filt is not None:
                filt.reset(info, seed, episode)
            done = False
            while not done:
                u = np.asarray(controller.act(obs, k), dtype=float).reshape(-1)
                u_f = u
                if filt is not None:
                    u_f = np.asarray(filt(obs, u, k), dtype=float).reshape(-1)
                    rec.modified[k] = filt.last_modified
                r = env.step(u_f)
                inf = r.info
                rec.u_ctrl[k] = u
                rec.u_filtered[k] = u_f
                rec.u_applied[k] = inf["applied_input"]
                rec.action_noise[k] = inf["action_disturbance"]
                rec.forces[k] = inf["dynamics_force"]
                rec.rewards[k] = r.reward
                rec.cvals[k] = inf["constraint_values"]
                rec.viol[k] = inf["violation"]
                k += 1
                rec.states[k] = inf["true_state"]
                rec.obs[k] = r.obs
                rec.refs[k] = task.ref_state(k)
                obs, done = r.obs, r.done
                terminated, failed = inf["terminated"], inf["failure"]
        except Exception as exc:  # controller or environment failure ends the episode
            error = f"{type(exc).__name__}: {exc}"
    gp_data = None
    if train_seconds and training_settings(cfg)["save_csv"] and controller.gp is not None:
        gp_data = controller.gp.training_data()
    diag = dict(controller.diagnostics())
    if filt is not None and hasattr(filt, "diagnostics") and getattr(filt, "info", None) is not None:
        diag.update(filt.diagnostics())
    return EpisodeTrace(
        system=cfg.system_name,
        seed=seed,
        episode=episode,
        states=rec.states[: k + 1],
        obs=rec.obs[: k + 1],
        refs=rec.refs[: k + 1],
        u_ctrl=rec.u_ctrl[:k],
        u_filtered=rec.u_filtered[:k],
        u_applied=rec.u_applied[:k],
        action_noise=rec.action_noise[:k],
        forces=rec.forces[:k],
        rewards=rec.rewards[:k],
        constraint_values=rec.cvals[:k],
        violations=rec.viol[:k],
        filter_modified=rec.modified[:k],
        terminated=bool(terminated),
        failed=bool(failed),
        error=error,
        wall_time=time.perf_counter() - wall0,
        has_filter=filt is not None,
        task=task,
        diagnostics=diag,
        train_seconds=train_seconds,
        dt=env.dt,
        gp_data=gp_data,
    )


def episode_index(cfg: ExperimentConfig):
    """The ordered ``(seed, episode)`` pairs a run covers."""
    return [(s, e) for s in cfg.seeds for e in range(cfg.episodes)]
