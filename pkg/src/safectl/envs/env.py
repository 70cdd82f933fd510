"""Episodic environment with prior-model disclosure, constraint info and disturbances."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..constraints import ConstraintSet, evaluate_constraints, is_violating
from ..disturbances import (
    DisturbanceSpec,
    DisturbanceTarget,
    RandomizationSpec,
    SeedPlan,
    disturbance_draw,
    sample_initial_state,
    sample_params,
)
from ..dynamics.models import DynamicsModel, SystemId
from ..errors import EpisodeOver, NonFiniteState
from .task import RewardKind, TaskSpec


@dataclass(frozen=True)
class ResetInfo:
    prior_model: DynamicsModel
    x0: np.ndarray
    task: TaskSpec
    constraints: ConstraintSet
    true_model: DynamicsModel
    dt: float
    input_low: np.ndarray
    input_high: np.ndarray


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    done: bool
    info: dict


@dataclass
class EnvState:
    x: np.ndarray
    step: int = 0
    cost: float = 0.0
    done: bool = False
    episode: int = 0
    seed: int = 0


@dataclass
class EnvConfig:
    model: DynamicsModel
    task: TaskSpec
    x0: np.ndarray
    constraints: ConstraintSet
    disturbances: tuple = ()
    randomization: RandomizationSpec = field(default_factory=RandomizationSpec)
    physics_hz: int = 1000
    control_hz: int = 50
    augment_obs_with_ref: bool = False

    def __post_init__(self):
        if self.physics_hz % self.control_hz:
            raise ValueError("physics_hz must be an integer multiple of control_hz")
        self.x0 = np.asarray(self.x0, dtype=float)


class SafeControlEnv:
    """Single-owner environment; create one instance per concurrently running episode."""

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        self.nominal = cfg.model
        self.model = cfg.model
        self.substeps = cfg.physics_hz // cfg.control_hz
        self.dt_physics = 1.0 / cfg.physics_hz
        self.dt = 1.0 / cfg.control_hz
        self.state: EnvState | None = None
        self.plan = SeedPlan(0)
        u_lo, u_hi = cfg.model.input_bounds()
        self.u_low, self.u_high = u_lo, u_hi

    @property
    def task(self) -> TaskSpec:
        return self.cfg.task

    def reset(self, seed: int = 0, episode: int = 0):
        cfg = self.cfg
        rand = cfg.randomization
        params = sample_params(rand, self.nominal.params, seed, episode)
        self.model = DynamicsModel(self.nominal.system_id, params)
        # Controllers see the nominal model (scaled), not the randomized truth.
        prior = self.nominal.scaled(rand.prior_scaling) if rand.prior_scaling != 1.0 else self.nominal
        x0 = sample_initial_state(rand, cfg.x0, seed, episode)
        self.plan = SeedPlan(seed)
        self.state = EnvState(x=x0.copy(), episode=episode, seed=seed)
        info = ResetInfo(
            prior, x0.copy(), cfg.task, cfg.constraints, self.model, self.dt, self.u_low.copy(), self.u_high.copy()
        )
        return self._observe(x0, 0), info

    def _draw(self, target: DisturbanceTarget, dim: int, step: int):
        total = np.zeros(dim)
        for idx, spec in enumerate(self.cfg.disturbances):
            if spec.target is target:
                total += disturbance_draw(spec, dim, self.plan, self.state.episode, step, idx)
        return total

    def _observe(self, x, step):
        obs = x + self._draw(DisturbanceTarget.OBSERVATION, x.size, step)
        if self.cfg.augment_obs_with_ref:
            obs = np.concatenate([obs, self.task.ref_state(step)])
        return obs

    def step(self, u, external_force=None) -> StepResult:
        st = self.state
        if st is None or st.done:
            raise EpisodeOver("step() called on a finished episode; call reset()")
        task = self.task
        i = st.step
        u_prop = np.asarray(u, dtype=float).reshape(-1)
        act_noise = self._draw(DisturbanceTarget.ACTION, u_prop.size, i)
        u_dist = u_prop + act_noise
        u_app = np.clip(u_dist, self.u_low, self.u_high)
        force = self._draw(DisturbanceTarget.DYNAMICS, self.model.n_force, i)
        if external_force is not None:
            force = force + np.asarray(external_force, dtype=float)

        x = st.x
        if task.reward is RewardKind.SPARSE:
            reward = 1.0 if abs(x[2]) <= task.theta_max else 0.0
        else:
            reward = -task.stage_cost(i, x, u_app)

        failed = False
        try:
            x_next = self.model.rk4_step(x, u_app, self.dt_physics, extra_force=force, substeps=self.substeps)
        except NonFiniteState:
            x_next = np.full_like(x, np.nan)
            failed = True
        st.step = i + 1
        st.x = x_next
        terminated = failed
        if not failed and self.model.system_id is SystemId.CARTPOLE and abs(x_next[2]) > task.theta_max:
            terminated = True
        done = terminated or st.step >= task.L
        if done and task.reward is RewardKind.QUADRATIC and not failed:
            reward -= task.terminal_cost(st.step, x_next)
        st.done = done
        st.cost -= reward

        if failed:
            cvals = np.full(self.cfg.constraints.n_rows, np.inf)
        else:
            cvals = evaluate_constraints(self.cfg.constraints, x_next, u_app)
        obs = self._observe(x_next, st.step) if not failed else x_next.copy()
        info = {
            "step": st.step,
            "true_state": x_next.copy(),
            "constraint_values": cvals,
            "violation": is_violating(cvals),
            "proposed_input": u_prop,
            "disturbed_input": u_dist,
            "applied_input": u_app,
            "action_disturbance": act_noise,
            "dynamics_force": force,
            "terminated": terminated,
            "failure": failed,
        }
        return StepResult(obs, float(reward), done, info)


def make_env(model, task, x0=None, constraints=None, disturbances=(), randomization=None, **kw) -> SafeControlEnv:
    if x0 is None:
        x0 = task.x_ref[0]
    if constraints is None:
        constraints = ConstraintSet((), model.n_x, model.n_u)
    cfg = EnvConfig(
        model=model,
        task=task,
        x0=np.asarray(x0, dtype=float),
        constraints=constraints,
        disturbances=tuple(disturbances),
        randomization=randomization or RandomizationSpec(),
        **kw,
    )
    return SafeControlEnv(cfg)


__all__ = ["DisturbanceSpec", "EnvConfig", "EnvState", "ResetInfo", "SafeControlEnv", "StepResult", "make_env"]
