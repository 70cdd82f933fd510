"""Receding-horizon MPC on a condensed QP, linear or SQP-nonlinear.

The decision vector is the stacked input sequence ``U = [u_0, ..., u_{H-1}]``.
Predictions come from per-step affine models

    x_{k+1} = xn_k + A_k (x_k - xb_k) + B_k (u_k - ub_k)

built either about the reference (linear mode) or about a rollout of the
current input guess (nonlinear mode). Constraints apply at ``(x_{k+1}, u_k)``,
the pair the environment evaluates after each step.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..constraints import ConstraintSet, Form, as_linear_rows
from ..numopt.qp import QpProblem, QpStatus, solve_qp
from ..numopt.riccati import solve_dare
from .base import Controller, Rk4Model
from .lqr import equilibrium_state


class MpcMode(str, enum.Enum):
    LINEAR = "linear"
    NONLINEAR = "nonlinear"


@dataclass(frozen=True, eq=False)
class MpcConfig:
    horizon: int = 25
    mode: MpcMode = MpcMode.LINEAR
    Q: np.ndarray | None = None
    R: np.ndarray | None = None
    P_f: np.ndarray | None = None
    sqp_iters: int = 3
    step_damping: float = 1.0
    warm_start: bool = True
    slack_penalty: float = 1e6
    state_backoff: float = 1e-4
    use_constraints: bool = True
    qp_eps: float = 1e-6
    qp_max_iter: int = 4000

    def __post_init__(self):
        object.__setattr__(self, "mode", MpcMode(self.mode))
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.sqp_iters < 1:
            raise ValueError("sqp_iters must be >= 1")
        if not 0.0 < self.step_damping <= 1.0:
            raise ValueError("step_damping must lie in (0, 1]")


@dataclass
class MpcResult:
    u0: np.ndarray
    X: np.ndarray
    U: np.ndarray
    status: QpStatus
    slack_used: bool = False
    max_slack: float = 0.0
    qp_iterations: int = 0
    sqp_iterations: int = 0
    diagnostics: dict = field(default_factory=dict)


def cost_weights(cfg: MpcConfig, task):
    Q = task.Q if cfg.Q is None else np.atleast_2d(np.asarray(cfg.Q, dtype=float))
    R = task.R if cfg.R is None else np.atleast_2d(np.asarray(cfg.R, dtype=float))
    if Q.shape[0] != Q.shape[1] or Q.ndim != 2:
        Q = np.diag(np.ravel(Q))
    if R.shape[0] != R.shape[1]:
        R = np.diag(np.ravel(R))
    return Q, R


def terminal_weight(cfg: MpcConfig, prior, task, dt: float) -> np.ndarray:
    """``P_f`` from the configuration, else the DARE solution about the prior's equilibrium."""
    if cfg.P_f is not None:
        return np.asarray(cfg.P_f, dtype=float)
    Q, R = cost_weights(cfg, task)
    x_op = equilibrium_state(prior, task.x_ref[0])
    Ad, Bd, _ = prior.linearize_discrete(x_op, prior.equilibrium_input(), dt)
    return solve_dare(Ad, Bd, Q, R).P


def reference_affine(prior, task, step: int, H: int, dt: float, cache=None):
    """Per-step ZOH linearizations about the reference."""
    out = []
    for k in range(H):
        i = step + k
        key = (min(i, task.L), min(i, task.L - 1))
        if cache is not None and key in cache:
            out.append(cache[key])
            continue
        xr, ur = task.ref_state(i), task.ref_input(i)
        Ad, Bd, off = prior.linearize_discrete(xr, ur, dt)
        item = (xr, ur, xr + off, Ad, Bd)
        if cache is not None:
            cache[key] = item
        out.append(item)
    return out


def rollout_affine(model, x0, U):
    """Linearizations along the rollout of ``U`` through ``model``."""
    lin = []
    x = np.asarray(x0, dtype=float)
    for u in U:
        xn, A, B = model.linearize(x, u)
        lin.append((x, u, xn, A, B))
        x = xn
    return lin


def condense(x0, lin, n_u: int):
    """``x_k = S[k] + G[k] @ U`` for ``k = 0..H``."""
    H = len(lin)
    n = x0.size
    S = np.zeros((H + 1, n))
    G = np.zeros((H + 1, n, H * n_u))
    S[0] = x0
    for k, (xb, ub, xn, A, B) in enumerate(lin):
        S[k + 1] = A @ S[k] + (xn - A @ xb - B @ ub)
        G[k + 1] = A @ G[k]
        G[k + 1][:, k * n_u : (k + 1) * n_u] += B
    return S, G


def _constraint_rows(sets, task, step, S, G, n_x, n_u, backoff):
    rows, ubs, state_mask = [], [], []
    H = G.shape[0] - 1
    exact = {}
    for k in range(H):
        cset = sets[k]
        if cset is None or cset.n_rows == 0:
            continue
        if id(cset) in exact:
            Gc, hc = exact[id(cset)]
        else:
            Gc, hc = as_linear_rows(cset, (task.ref_state(step + k + 1), task.ref_input(step + k)))
            if not any(sp.form is Form.QUADRATIC for sp in cset.specs):
                exact[id(cset)] = (Gc, hc)
        Gx, Gu = Gc[:, :n_x], Gc[:, n_x:]
        A = Gx @ G[k + 1]
        A[:, k * n_u : (k + 1) * n_u] += Gu
        is_state = np.any(Gx != 0.0, axis=1)
        rows.append(A)
        ubs.append(hc - Gx @ S[k + 1] - backoff * is_state)
        state_mask.append(is_state)
    if not rows:
        return np.zeros((0, H * n_u)), np.zeros(0), np.zeros(0, dtype=bool)
    return np.vstack(rows), np.concatenate(ubs), np.concatenate(state_mask)


def _solve_step(cfg, task, step, x0, lin, Q, R, P_f, sets, bounds, warm, warm_dual=None):
    n_x = x0.size
    n_u = R.shape[0]
    H = len(lin)
    N = H * n_u
    S, G = condense(x0, lin, n_u)
    # states past the task horizon carry no weight; P_f sits on the last counted state
    kt = min(H, task.L - step) if task.L - step >= 1 else H
    W = np.repeat(Q[None], H, axis=0)
    W[kt - 1] = P_f
    W[kt:] = 0.0
    Gs = G[1:]
    ref = np.array([task.ref_state(step + k) for k in range(1, H + 1)])
    uref = np.array([task.ref_input(step + k) for k in range(H)]).ravel()
    Rbar = np.kron(np.eye(H), R)
    WG = np.matmul(W, Gs)
    Hq = Rbar + np.tensordot(Gs, WG, axes=([0, 1], [0, 1]))
    Hq = 0.5 * (Hq + Hq.T)
    gq = -Rbar @ uref + np.tensordot(WG, S[1:] - ref, axes=([0, 1], [0, 1]))

    A_c, ub_c, smask = _constraint_rows(sets, task, step, S, G, n_x, n_u, cfg.state_backoff)
    blocks_A, blocks_lb, blocks_ub = [A_c], [np.full(ub_c.size, -np.inf)], [ub_c]
    if bounds is not None:
        lo, hi = bounds
        blocks_A.append(np.eye(N))
        blocks_lb.append(np.tile(lo, H))
        blocks_ub.append(np.tile(hi, H))
    A_all = np.vstack(blocks_A)
    lb_all = np.concatenate(blocks_lb)
    ub_all = np.concatenate(blocks_ub)
    kw = dict(eps_abs=cfg.qp_eps, eps_rel=cfg.qp_eps, max_iter=cfg.qp_max_iter)
    if warm_dual is not None and warm_dual.size != lb_all.size:
        warm_dual = None
    sol = solve_qp(QpProblem(Hq, gq, A_all, lb_all, ub_all), warm_start=warm, warm_dual=warm_dual, **kw)
    slack_used, max_slack = False, 0.0
    U = sol.z_star
    if sol.status is not QpStatus.SOLVED and smask.any():
        U, max_slack, sol = _solve_slack(cfg, Hq, gq, A_all, lb_all, ub_all, smask, warm, kw)
        slack_used = True
    return U.reshape(H, n_u), S, G, sol, slack_used, max_slack


def _solve_slack(cfg, Hq, gq, A_all, lb_all, ub_all, smask, warm, kw):
    """State rows relaxed by non-negative slacks with an exact-penalty cost."""
    N = Hq.shape[0]
    idx = np.flatnonzero(smask)
    ns = idx.size
    rho = cfg.slack_penalty
    H2 = np.zeros((N + ns, N + ns))
    H2[:N, :N] = Hq
    H2[N:, N:] = rho * np.eye(ns)
    g2 = np.concatenate([gq, np.full(ns, rho)])
    A2 = np.zeros((A_all.shape[0] + ns, N + ns))
    A2[: A_all.shape[0], :N] = A_all
    A2[idx, N + np.arange(ns)] = -1.0
    A2[A_all.shape[0] :, N:] = np.eye(ns)
    lb2 = np.concatenate([lb_all, np.zeros(ns)])
    ub2 = np.concatenate([ub_all, np.full(ns, np.inf)])
    ws = None if warm is None else np.concatenate([warm, np.zeros(ns)])
    sol = solve_qp(QpProblem(H2, g2, A2, lb2, ub2), warm_start=ws, **kw)
    return sol.z_star[:N], float(np.max(sol.z_star[N:], initial=0.0)), sol


def mpc_solve(
    cfg: MpcConfig,
    prior,
    task,
    x_now,
    step: int,
    dt: float,
    constraints: ConstraintSet | list | None = None,
    input_bounds=None,
    U_warm=None,
    P_f=None,
    model=None,
    lin_cache=None,
) -> MpcResult:
    """One MPC solve from ``x_now`` at episode step ``step``.

    ``constraints`` is a single set or a list of ``horizon`` per-step sets
    (the entry ``k`` applies to ``(x_{k+1}, u_k)``). ``model`` overrides the
    nonlinear prediction model (default: one RK4 step of the prior).
    """
    x0 = np.asarray(x_now, dtype=float)
    H = cfg.horizon
    Q, R = cost_weights(cfg, task)
    n_u = R.shape[0]
    if P_f is None:
        P_f = terminal_weight(cfg, prior, task, dt)
    if isinstance(constraints, (list, tuple)):
        sets = list(constraints)
    else:
        sets = [constraints] * H
    if U_warm is None:
        U_guess = np.array([task.ref_input(step + k) for k in range(H)], dtype=float)
    else:
        U_guess = np.array(U_warm, dtype=float).reshape(H, n_u)
    if input_bounds is not None:
        U_guess = np.clip(U_guess, input_bounds[0], input_bounds[1])

    if cfg.mode is MpcMode.LINEAR:
        lin = reference_affine(prior, task, step, H, dt, lin_cache)
        warm = U_guess.ravel() if cfg.warm_start and U_warm is not None else None
        U, S, G, sol, slack, mslack = _solve_step(cfg, task, step, x0, lin, Q, R, P_f, sets, input_bounds, warm)
        n_sqp = 1
        qp_its = sol.iterations
    else:
        model = model or Rk4Model(prior, dt)
        U = U_guess
        qp_its = 0
        slack, mslack = False, 0.0
        dual = None
        for n_sqp in range(1, cfg.sqp_iters + 1):
            lin = rollout_affine(model, x0, U)
            U_qp, S, G, sol, slack, mslack = _solve_step(
                cfg, task, step, x0, lin, Q, R, P_f, sets, input_bounds, U.ravel() if cfg.warm_start else None, dual
            )
            dual = None if slack or not cfg.warm_start else sol.dual
            qp_its += sol.iterations
            U = U + cfg.step_damping * (U_qp - U)
    X = S + G @ U.ravel()
    diag = {"qp_status": sol.status.value, "primal_res": sol.primal_res, "dual_res": sol.dual_res}
    return MpcResult(U[0].copy(), X, U, sol.status, slack, mslack, qp_its, n_sqp, diag)


class MpcController(Controller):
    name = "mpc"

    def __init__(self, cfg: MpcConfig | None = None, **kw):
        self.cfg = cfg or MpcConfig(**kw)
        self.last = None

    def reset(self, reset_info, seed=0, episode=0):
        super().reset(reset_info, seed, episode)
        prior, task, dt = reset_info.prior_model, reset_info.task, reset_info.dt
        self.P_f = terminal_weight(self.cfg, prior, task, dt)
        self.constraints = reset_info.constraints if self.cfg.use_constraints else None
        self.bounds = (reset_info.input_low, reset_info.input_high)
        self.U_prev = None
        self.lin_cache = {}
        self.last = None
        self.n_slack = 0

    def _constraints_for(self, step):
        return self.constraints

    def _model(self, step):
        return None

    def act(self, obs, step):
        info = self.info
        x = np.asarray(obs, dtype=float)[: info.task.n_x]
        warm = None
        if self.cfg.warm_start and self.U_prev is not None:
            warm = np.vstack([self.U_prev[1:], self.U_prev[-1:]])
        res = mpc_solve(
            self.cfg,
            info.prior_model,
            info.task,
            x,
            step,
            info.dt,
            constraints=self._constraints_for(step),
            input_bounds=self.bounds,
            U_warm=warm,
            P_f=self.P_f,
            model=self._model(step),
            lin_cache=self.lin_cache,
        )
        self.U_prev = res.U
        self.last = res
        self.n_slack += int(res.slack_used)
        return res.u0

    def diagnostics(self):
        if self.last is None:
            return {}
        return {"qp_status": self.last.status.value, "slack_steps": self.n_slack}
