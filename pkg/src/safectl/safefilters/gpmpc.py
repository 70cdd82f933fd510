"""GP-MPC: nonlinear MPC on prior-plus-GP dynamics with variance-based constraint tightening.

Uncertainty is propagated mean-equivalently: the predicted mean follows
``f_prior + mu_gp`` and per-state variances add up along the horizon
without cross-covariance terms. Each constraint spec is tightened by
``z_score * max_rows sqrt(a^T diag(var) a)`` over its state rows.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from ..constraints import ConstraintSet, tighten
from ..controllers.base import Controller, Rk4Model
from ..controllers.mpc import MpcConfig, MpcMode, mpc_solve, terminal_weight
from ..envs.task import TaskSpec
from .gp import GpModel, RESERVOIR, TransitionBuffer, gp_fit, residual_dataset

DEFAULT_Z = 1.96
DEFAULT_CONTROL_HZ = 10


class GpDynamics:
    """Discrete model ``x+ = RK4_prior(x, u) + mu_gp([x, u])``."""

    def __init__(self, prior, gp: GpModel, dt: float, substeps: int = 1):
        self.base = Rk4Model(prior, dt, substeps)
        self.gp = gp
        self.n_x = prior.n_x
        self.dt = dt

    def step(self, x, u):
        xn = self.base.step(x, u)
        if self.gp.is_empty:
            return xn
        return xn + self.gp.predict(np.concatenate([x, u]))[0][0]

    def linearize(self, x, u):
        xn, A, B = self.base.linearize(x, u)
        if self.gp.is_empty:
            return xn, A, B
        mean, jac = self.gp.mean_jacobian(np.concatenate([x, u]))
        return xn + mean, A + jac[:, : self.n_x], B + jac[:, self.n_x :]

    def variance(self, x, u):
        if self.gp.is_empty:
            return np.zeros(self.n_x)
        return self.gp.predict(np.concatenate([x, u]))[1][0]


def state_variances(dyn: GpDynamics, x0, U):
    """Accumulated per-state variance at ``x_1..x_H`` along the mean rollout."""
    H = U.shape[0]
    out = np.zeros((H, dyn.n_x))
    acc = np.zeros(dyn.n_x)
    x = np.asarray(x0, dtype=float)
    for k in range(H):
        acc = acc + dyn.variance(x, U[k])
        out[k] = acc
        x = dyn.step(x, U[k])
    return out


def constraint_margins(cset: ConstraintSet, variances, z_score: float) -> np.ndarray:
    """Per-step, per-spec margins ``(H, n_specs)``."""
    H = variances.shape[0]
    margins = np.zeros((H, len(cset)))
    n_x, n_u = cset.n_x, cset.n_u
    for j, spec in enumerate(cset.specs):
        G, _ = spec.linear_rows(n_x, n_u, (np.zeros(n_x), np.zeros(n_u)))
        Gx = G[:, :n_x]
        for k in range(H):
            margins[k, j] = z_score * float(np.max(np.sqrt((Gx * Gx) @ variances[k]), initial=0.0))
    return margins


def gpmpc_plan(
    cfg: MpcConfig, prior, gp: GpModel, task, x_now, step: int, dt: float, z_score=DEFAULT_Z, substeps: int = 1, **kw
):
    """One GP-MPC solve; returns ``(MpcResult, variances (H, n_x))``.

    Keyword arguments are forwarded to ``mpc_solve`` (``constraints`` is the
    untightened set).
    """
    cfg = replace(cfg, mode=MpcMode.NONLINEAR)
    dyn = GpDynamics(prior, gp, dt, substeps)
    x_now = np.asarray(x_now, dtype=float)
    cset = kw.pop("constraints", None)
    U_guess = kw.get("U_warm")
    if U_guess is None:
        U_guess = np.array([task.ref_input(step + k) for k in range(cfg.horizon)], dtype=float)
    bounds = kw.get("input_bounds")
    if bounds is not None:
        U_guess = np.clip(U_guess, bounds[0], bounds[1])
    var = state_variances(dyn, x_now, np.asarray(U_guess).reshape(cfg.horizon, -1))
    sets = cset
    if cset is not None and len(cset):
        sets = tighten(cset, constraint_margins(cset, var, z_score))
    res = mpc_solve(cfg, prior, task, x_now, step, dt, constraints=sets, model=dyn, **kw)
    return res, var


def coarse_task(task: TaskSpec, hold: int) -> TaskSpec:
    """The task sampled every ``hold`` environment steps."""
    if hold == 1:
        return task
    L = math.ceil(task.L / hold)
    idx_x = np.minimum(np.arange(L + 1) * hold, task.L)
    idx_u = np.minimum(np.arange(L) * hold, task.L - 1)
    return TaskSpec(task.kind, task.x_ref[idx_x], task.u_ref[idx_u], task.Q, task.R, L, task.theta_max, task.reward)


def collect_transitions(env, policy, seconds: float, hold: int, seed: int = 0, excitation=0.0, capacity=RESERVOIR):
    """Roll out ``policy(obs, step)`` plus Gaussian excitation, recording transitions every ``hold`` steps.

    Returns the buffer and the number of simulated seconds consumed.
    """
    buf = TransitionBuffer(capacity)
    rng = np.random.default_rng(seed)
    budget = int(round(seconds / env.dt))
    used = 0
    episode = 0
    while used + hold <= budget:
        obs, info = env.reset(seed, episode)
        if hasattr(policy, "reset"):
            policy.reset(info, seed, episode)
        step = 0
        done = False
        while not done and used + hold <= budget:
            x = np.asarray(obs, dtype=float)[: info.task.n_x]
            u = np.asarray(policy.act(obs, step), dtype=float)
            u = u + excitation * rng.standard_normal(u.size)
            u = np.clip(u, info.input_low, info.input_high)
            held = 0
            while held < hold and not done:
                r = env.step(u)
                obs, done = r.obs, r.done
                held += 1
            step += held
            used += held
            if r.info["failure"]:
                break
            if held == hold:
                buf.add(x, u, r.info["true_state"])
        episode += 1
    return buf, used * env.dt


def fit_residual_gp(prior, buffer: TransitionBuffer, dt: float, substeps: int = 1, **fit_kw) -> GpModel:
    X, U, Xn = buffer.arrays()
    base = Rk4Model(prior, dt, substeps)
    Z, Y = residual_dataset(base.step, X, U, Xn)
    return gp_fit(Z, Y, **fit_kw)


class GpMpcController(Controller):
    """GP-MPC running at ``control_hz`` and holding its input between solves."""

    name = "gp_mpc"

    def __init__(self, cfg: MpcConfig | None = None, gp: GpModel | None = None, z_score=DEFAULT_Z,
                 control_hz: float = DEFAULT_CONTROL_HZ, **mpc_kw):
        self.cfg = replace(cfg or MpcConfig(**mpc_kw), mode=MpcMode.NONLINEAR)
        self.gp = gp
        self.z_score = z_score
        self.control_hz = control_hz
        self.last = None

    def hold_steps(self, env_dt: float) -> int:
        hold = int(round(1.0 / (self.control_hz * env_dt)))
        if hold < 1 or abs(hold * env_dt * self.control_hz - 1.0) > 1e-9:
            raise ValueError("GP-MPC rate must divide the environment control rate")
        return hold

    def reset(self, reset_info, seed=0, episode=0):
        super().reset(reset_info, seed, episode)
        prior = reset_info.prior_model
        self.hold = self.hold_steps(reset_info.dt)
        self.dt = reset_info.dt * self.hold
        self.task = coarse_task(reset_info.task, self.hold)
        if self.gp is None:
            self.gp = GpModel.empty(prior.n_x + prior.n_u, prior.n_x)
        self.P_f = terminal_weight(self.cfg, prior, self.task, self.dt)
        self.constraints = reset_info.constraints if self.cfg.use_constraints else None
        self.bounds = (reset_info.input_low, reset_info.input_high)
        self.U_prev = None
        self.u_hold = None
        self.n_slack = 0

    def train(self, env, policy, seconds: float, seed: int = 0, excitation: float = 0.0, **fit_kw):
        """Collect transitions at this controller's rate and fit the residual GP."""
        obs, info = env.reset(seed, 0)
        hold = self.hold_steps(info.dt)
        buf, used = collect_transitions(env, policy, seconds, hold, seed, excitation)
        self.gp = fit_residual_gp(info.prior_model, buf, info.dt * hold, hold, seed=seed, **fit_kw)
        self.train_seconds = used
        return self.gp

    def act(self, obs, step):
        if step % self.hold and self.u_hold is not None:
            return self.u_hold
        x = np.asarray(obs, dtype=float)[: self.info.task.n_x]
        warm = None
        if self.cfg.warm_start and self.U_prev is not None:
            warm = np.vstack([self.U_prev[1:], self.U_prev[-1:]])
        res, _ = gpmpc_plan(
            self.cfg, self.info.prior_model, self.gp, self.task, x, step // self.hold, self.dt, self.z_score, self.hold,
            constraints=self.constraints, input_bounds=self.bounds, U_warm=warm, P_f=self.P_f,
        )
        self.U_prev = res.U
        self.last = res
        self.n_slack += int(res.slack_used)
        self.u_hold = res.u0
        return res.u0

    def diagnostics(self):
        if self.last is None:
            return {}
        return {"qp_status": self.last.status.value, "slack_steps": self.n_slack}
