"""Model predictive safety certification.

A proposed input is accepted when a finite-horizon plan starting with it
keeps the linearized prior inside the constraints and ends in a small box
around the equilibrium. Otherwise the closest certifiable first input is
used. If no input is certifiable the state rows are softened with penalized
slack, and only if that fails too does the filter fall back to the last
certified plan.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..constraints import ConstraintSet, as_linear_rows
from ..controllers.lqr import equilibrium_state
from ..controllers.mpc import condense
from ..numopt.qp import QpProblem, QpStatus, solve_qp
from ..numopt.riccati import solve_dare
from .base import SafetyFilter

DEFAULT_HORIZON = 50
TERMINAL_HALF_WIDTH = 0.01


class MpscSource(str, enum.Enum):
    PROPOSED = "proposed"
    PROJECTED = "projected"
    SLACK = "slack"
    BACKUP = "backup"


@dataclass(eq=False)
class MpscConfig:
    """Plans are parameterized as ``u_k = u_eq - K (x_k - x_eq) + v_k`` with
    ``K`` the discrete LQR gain for ``(Q, R)``; this keeps the condensed
    prediction well conditioned for open-loop unstable systems.
    """

    prior: object
    dt: float
    constraints: ConstraintSet
    horizon: int = DEFAULT_HORIZON
    terminal_half_width: float = TERMINAL_HALF_WIDTH
    x_eq: np.ndarray | None = None
    u_eq: np.ndarray | None = None
    input_bounds: tuple | None = None
    Q: np.ndarray | None = None
    R: np.ndarray | None = None
    slack_penalty: float = 1e6
    qp_eps: float = 1e-7
    qp_max_iter: int = 4000
    state_margin: float = 0.0  # tightening of state rows against linearization error

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.state_margin < 0:
            raise ValueError("state margin must be non-negative")
        if self.terminal_half_width < 0:
            raise ValueError("terminal half-width must be non-negative")
        if self.x_eq is None:
            self.x_eq = equilibrium_state(self.prior, np.zeros(self.prior.n_x))
        if self.u_eq is None:
            self.u_eq = self.prior.equilibrium_input()
        self.x_eq = np.asarray(self.x_eq, dtype=float)
        self.u_eq = np.asarray(self.u_eq, dtype=float)
        n_x, n_u = self.x_eq.size, self.u_eq.size
        Ad, Bd, off = self.prior.linearize_discrete(self.x_eq, self.u_eq, self.dt)
        Q = np.eye(n_x) if self.Q is None else np.asarray(self.Q, dtype=float)
        R = np.eye(n_u) if self.R is None else np.asarray(self.R, dtype=float)
        self.K = solve_dare(Ad, Bd, Q, R).K
        A_cl = Ad - Bd @ self.K
        self._lin = [(self.x_eq, np.zeros(n_u), self.x_eq + off, A_cl, Bd)] * self.horizon


@dataclass
class MpscState:
    """Mutable per-episode memory: feed-forward terms ``v_k`` of the last certified plan."""

    plan: np.ndarray | None = None
    age: int = 0
    source: MpscSource = MpscSource.PROPOSED


def _prediction(cfg: MpscConfig, x):
    """Affine maps ``x_k = S[k] + G[k] V`` and ``u_k = Su[k] + Gu[k] V``."""
    N, n_u = cfg.horizon, cfg.u_eq.size
    S, G = condense(np.asarray(x, dtype=float), cfg._lin, n_u)
    Su = cfg.u_eq - (S[:N] - cfg.x_eq) @ cfg.K.T
    Gu = -np.einsum("ij,kjl->kil", cfg.K, G[:N])
    for k in range(N):
        Gu[k][:, k * n_u : (k + 1) * n_u] += np.eye(n_u)
    return S, G, Su, Gu


def _rows(cfg: MpscConfig, x, S, G, Su, Gu):
    """Stacked inequality rows over the decision vector V (flattened ``(N, n_u)``).

    Returns ``(A, lb, ub, soft_mask)``; state rows (path and terminal) are softenable.
    """
    N, n_x = cfg.horizon, cfg.x_eq.size
    Gc, hc = as_linear_rows(cfg.constraints, (np.asarray(x, dtype=float), cfg.u_eq))
    A, lo, hi, soft = [], [], [], []
    if Gc.shape[0]:
        Gx, Gw = Gc[:, :n_x], Gc[:, n_x:]
        state_row = np.any(Gx != 0, axis=1)
        for k in range(N):
            A.append(Gx @ G[k + 1] + Gw @ Gu[k])
            hi.append(hc - Gx @ S[k + 1] - Gw @ Su[k] - cfg.state_margin * state_row)
            lo.append(np.full(hc.size, -np.inf))
            soft.append(state_row)
    A.append(G[N])
    hi.append(cfg.x_eq + cfg.terminal_half_width - S[N])
    lo.append(cfg.x_eq - cfg.terminal_half_width - S[N])
    soft.append(np.ones(n_x, dtype=bool))
    if cfg.input_bounds is not None:
        A.append(Gu.reshape(-1, Gu.shape[2]))
        lo.append((np.asarray(cfg.input_bounds[0]) - Su).reshape(-1))
        hi.append((np.asarray(cfg.input_bounds[1]) - Su).reshape(-1))
        soft.append(np.zeros(Su.size, dtype=bool))
    return np.vstack(A), np.concatenate(lo), np.concatenate(hi), np.concatenate(soft)


def _objective(cfg, v_target):
    """``|v_0 - v_target|^2``; the tail is unweighted so a certifiable proposal is its own projection."""
    N, n_u = cfg.horizon, cfg.u_eq.size
    H = np.zeros((N * n_u, N * n_u))
    H[:n_u, :n_u] = np.eye(n_u)
    g = np.zeros(N * n_u)
    g[:n_u] = -v_target
    return H, g


def _solve(cfg, H, g, A, lb, ub, warm=None):
    return solve_qp(QpProblem(H, g, A, lb, ub), warm_start=warm, eps_abs=cfg.qp_eps, eps_rel=cfg.qp_eps,
                    max_iter=cfg.qp_max_iter)


def _feasible(A, lb, ub, U, tol):
    v = A @ U
    return bool(np.all(v <= ub + tol) and np.all(v >= lb - tol))


def mpsc_filter(cfg: MpscConfig, u_proposed, x, step: int = 0, state: MpscState | None = None):
    """Return ``(u_safe, certified)``.

    ``state`` (optional) carries the backup plan between calls; its
    ``source`` field records which branch produced the input.
    """
    state = state if state is not None else MpscState()
    N, n_u = cfg.horizon, cfg.u_eq.size
    u_p = np.asarray(u_proposed, dtype=float).reshape(-1)
    S, G, Su, Gu = _prediction(cfg, x)
    A, lb, ub, soft = _rows(cfg, x, S, G, Su, Gu)
    v_p = u_p - Su[0]
    H, g = _objective(cfg, v_p)
    tol = 10 * cfg.qp_eps

    sol = _solve(cfg, H, g, A, lb, ub)
    if sol.status is not QpStatus.INFEASIBLE and np.all(np.isfinite(sol.z_star)):
        V = sol.z_star
        # a projection within solver accuracy of the proposal certifies the proposal itself
        if np.max(np.abs(V[:n_u] - v_p)) <= tol * max(1.0, float(np.max(np.abs(v_p)))):
            Vp = np.concatenate([v_p, V[n_u:]])
            if _feasible(A, lb, ub, Vp, tol):
                return _accept(state, Vp, n_u, u_p.copy(), MpscSource.PROPOSED), True
        if _feasible(A, lb, ub, V, tol):
            return _accept(state, V, n_u, Su[0] + V[:n_u], MpscSource.PROJECTED), True

    V = _slack_solve(cfg, H, g, A, lb, ub, soft)
    if V is not None:
        state.source = MpscSource.SLACK
        return _clip(cfg, Su[0] + V[:n_u]), False

    if state.plan is not None and state.age + 1 < N:
        # replay the feed-forward part of the last certified plan under the stabilizing feedback
        state.age += 1
        state.source = MpscSource.BACKUP
        x = np.asarray(x, dtype=float)
        return _clip(cfg, cfg.u_eq - cfg.K @ (x - cfg.x_eq) + state.plan[state.age]), False
    state.source = MpscSource.BACKUP
    return cfg.u_eq.copy(), False


def _clip(cfg, u):
    if cfg.input_bounds is None:
        return u
    return np.clip(u, cfg.input_bounds[0], cfg.input_bounds[1])


def _accept(state, V, n_u, u0, source):
    state.plan = V.reshape(-1, n_u).copy()
    state.age = 0
    state.source = source
    return u0


def _slack_solve(cfg, H, g, A, lb, ub, soft):
    """Soften path and terminal rows with one non-negative slack per row."""
    n = H.shape[0]
    idx = np.flatnonzero(soft)
    m = idx.size
    Hs = np.zeros((n + m, n + m))
    Hs[:n, :n] = H
    Hs[n:, n:] = cfg.slack_penalty * np.eye(m)
    gs = np.concatenate([g, np.full(m, cfg.slack_penalty)])
    # lb - s <= a u <= ub + s for softened rows
    up = np.zeros((A.shape[0], m))
    up[idx, np.arange(m)] = -1.0
    down = np.zeros((A.shape[0], m))
    down[idx, np.arange(m)] = 1.0
    A_up = np.hstack([A, up])
    A_down = np.hstack([A, down])
    A_s = np.vstack([A_up, A_down, np.hstack([np.zeros((m, n)), np.eye(m)])])
    lb_s = np.concatenate([np.full(A.shape[0], -np.inf), lb, np.zeros(m)])
    ub_s = np.concatenate([ub, np.full(A.shape[0], np.inf), np.full(m, np.inf)])
    sol = _solve(cfg, Hs, gs, A_s, lb_s, ub_s)
    if sol.status in (QpStatus.SOLVED, QpStatus.MAX_ITER) and np.all(np.isfinite(sol.z_star)):
        return sol.z_star[:n]
    return None


class MpscFilter(SafetyFilter):
    """Episode-scoped MPSC filter built from the environment's reset information."""

    name = "mpsc"

    def __init__(self, horizon: int = DEFAULT_HORIZON, terminal_half_width: float = TERMINAL_HALF_WIDTH, **kw):
        self.horizon = horizon
        self.terminal_half_width = terminal_half_width
        self.kw = kw

    def reset(self, reset_info, seed=0, episode=0):
        super().reset(reset_info, seed, episode)
        self.cfg = MpscConfig(
            reset_info.prior_model, reset_info.dt, reset_info.constraints, self.horizon, self.terminal_half_width,
            x_eq=equilibrium_state(reset_info.prior_model, reset_info.task.x_ref[-1]),
            input_bounds=(reset_info.input_low, reset_info.input_high), **self.kw,
        )
        self.state = MpscState()
        self.n_uncertified = 0

    def filter(self, obs, u_proposed, step):
        x = np.asarray(obs, dtype=float)[: self.info.task.n_x]
        u, certified = mpsc_filter(self.cfg, u_proposed, x, step, self.state)
        self.n_uncertified += int(not certified)
        modified = bool(np.max(np.abs(u - np.asarray(u_proposed, dtype=float))) > 1e-9)
        return u, modified

    def diagnostics(self):
        return {**super().diagnostics(), "uncertified": self.n_uncertified}
