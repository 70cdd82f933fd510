"""Dense convex QP solver based on ADMM operator splitting.

Solves::

    minimize    1/2 z^T H z + g^T z
    subject to  lb <= A z <= ub

with Ruiz equilibration, adaptive step size, infeasibility certificates and
an active-set polishing pass on the returned iterate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

EPS_ABS = 1e-6
EPS_REL = 1e-6
MAX_ITER = 4000

_INF = 1e20
_SIGMA = 1e-6
_ALPHA = 1.6
_RHO0 = 0.1
_RHO_EQ_SCALE = 1e3
_RHO_MIN, _RHO_MAX = 1e-6, 1e6
_CHECK_EVERY = 10
_ADAPT_EVERY = 50
_ADAPT_TOL = 5.0
_EPS_INF = 1e-7
_POLISH_TRIGGER = 1e3  # try early polishing once residuals are within this factor of tolerance


class QpStatus(enum.Enum):
    SOLVED = "Solved"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


@dataclass
class QpProblem:
    H: np.ndarray
    g: np.ndarray
    A_ineq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.g = np.asarray(self.g, dtype=float).reshape(-1)
        n = self.g.size
        A = np.asarray(self.A_ineq, dtype=float)
        self.A_ineq = A.reshape(-1, n) if A.size else np.zeros((0, n))
        m = self.A_ineq.shape[0]
        self.lb = np.asarray(self.lb, dtype=float).reshape(-1) if m else np.zeros(0)
        self.ub = np.asarray(self.ub, dtype=float).reshape(-1) if m else np.zeros(0)
        if self.H.shape != (n, n):
            raise ValueError(f"H must be {n}x{n}, got {self.H.shape}")
        if self.lb.shape != (m,) or self.ub.shape != (m,):
            raise ValueError("lb/ub must have one entry per constraint row")
        if np.any(self.lb > self.ub):
            raise ValueError("lb must not exceed ub")

    @property
    def n(self) -> int:
        return self.g.size

    @property
    def m(self) -> int:
        return self.A_ineq.shape[0]


@dataclass
class QpSolution:
    z_star: np.ndarray
    dual: np.ndarray
    status: QpStatus
    primal_res: float
    dual_res: float
    iterations: int = 0
    polished: bool = False
    info: dict = field(default_factory=dict)

    @property
    def solved(self) -> bool:
        return self.status is QpStatus.SOLVED


def _norm_inf(v) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def residuals(prob: QpProblem, z, y):
    """Unscaled primal and dual residuals (infinity norm) of a primal-dual pair."""
    Az = prob.A_ineq @ z
    proj = np.clip(Az, prob.lb, prob.ub)
    r_prim = _norm_inf(Az - proj)
    r_dual = _norm_inf(prob.H @ z + prob.g + prob.A_ineq.T @ y)
    return r_prim, r_dual


def _tolerances(prob: QpProblem, z, w, y, eps_abs, eps_rel):
    Az = prob.A_ineq @ z
    eps_p = eps_abs + eps_rel * max(_norm_inf(Az), _norm_inf(w))
    eps_d = eps_abs + eps_rel * max(_norm_inf(prob.H @ z), _norm_inf(prob.A_ineq.T @ y), _norm_inf(prob.g))
    return eps_p, eps_d


def _ruiz(H, A, iters=15):
    n, m = H.shape[0], A.shape[0]
    D = np.ones(n)
    E = np.ones(m)
    Hs, As = H.copy(), A.copy()
    for _ in range(iters):
        col = np.max(np.abs(Hs), axis=0)
        if m:
            col = np.maximum(col, np.max(np.abs(As), axis=0))
        d = 1.0 / np.sqrt(np.where(col > 1e-8, col, 1.0))
        d = np.clip(d, 1e-4, 1e4)
        if m:
            row = np.max(np.abs(As), axis=1)
            e = 1.0 / np.sqrt(np.where(row > 1e-8, row, 1.0))
            e = np.clip(e, 1e-4, 1e4)
        else:
            e = np.ones(0)
        Hs = d[:, None] * Hs * d[None, :]
        As = e[:, None] * As * d[None, :]
        D *= d
        E *= e
    return D, E, Hs, As


def _unconstrained(prob: QpProblem) -> QpSolution:
    try:
        z = np.linalg.solve(prob.H, -prob.g)
    except np.linalg.LinAlgError:
        z = np.linalg.lstsq(prob.H, -prob.g, rcond=None)[0]
    y = np.zeros(0)
    r_p, r_d = residuals(prob, z, y)
    status = QpStatus.SOLVED if r_d <= EPS_ABS + EPS_REL * _norm_inf(prob.g) else QpStatus.INFEASIBLE
    return QpSolution(z, y, status, r_p, r_d, 0, polished=True)


def _polish(prob: QpProblem, z, y, delta=1e-9, refine=3):
    """Solve the equality-constrained KKT system of the guessed active set."""
    A = prob.A_ineq
    w = np.clip(A @ z, prob.lb, prob.ub)
    lower = np.isfinite(prob.lb) & (prob.lb > -_INF) & (w - prob.lb < -y)
    upper = np.isfinite(prob.ub) & (prob.ub < _INF) & (prob.ub - w < y) & ~lower
    idx_l = np.flatnonzero(lower)
    idx_u = np.flatnonzero(upper)
    Aact = np.vstack([A[idx_l], A[idx_u]])
    bact = np.concatenate([prob.lb[idx_l], prob.ub[idx_u]])
    n, k = prob.n, Aact.shape[0]
    K = np.zeros((n + k, n + k))
    K[:n, :n] = prob.H
    K[:n, n:] = Aact.T
    K[n:, :n] = Aact
    Kreg = K.copy()
    Kreg[:n, :n] += delta * np.eye(n)
    Kreg[n:, n:] -= delta * np.eye(k)
    rhs = np.concatenate([-prob.g, bact])
    try:
        lu = lu_factor(Kreg, check_finite=True)
    except (np.linalg.LinAlgError, ValueError):
        return None
    sol = lu_solve(lu, rhs)
    for _ in range(refine):
        sol = sol + lu_solve(lu, rhs - K @ sol)
    if not np.all(np.isfinite(sol)):
        return None
    z_p = sol[:n]
    y_p = np.zeros(prob.m)
    y_p[idx_l] = sol[n : n + idx_l.size]
    y_p[idx_u] = sol[n + idx_l.size :]
    # Multipliers must have the sign of their bound side.
    y_p[idx_l] = np.minimum(y_p[idx_l], 0.0)
    y_p[idx_u] = np.maximum(y_p[idx_u], 0.0)
    return z_p, y_p


def _active_signature(prob: QpProblem, z, y):
    w = np.clip(prob.A_ineq @ z, prob.lb, prob.ub)
    lower = (prob.lb > -_INF) & (w - prob.lb < -y)
    upper = (prob.ub < _INF) & (prob.ub - w < y)
    return np.packbits(lower).tobytes() + np.packbits(upper).tobytes()


def _try_polish(prob, z, y, eps_abs, eps_rel, last_sig):
    """``None`` if the active set is unchanged, else ``(signature, result or None)``."""
    sig = _active_signature(prob, z, y)
    if sig == last_sig:
        return None
    out = _polish(prob, z, y)
    if out is None:
        return sig, None
    zp, yp = out
    rp, rd = residuals(prob, zp, yp)
    e_p, e_d = _tolerances(prob, zp, np.clip(prob.A_ineq @ zp, prob.lb, prob.ub), yp, eps_abs, eps_rel)
    if rp <= e_p and rd <= e_d:
        return sig, (zp, yp, rp, rd)
    return sig, None


def solve_qp(
    prob: QpProblem,
    warm_start=None,
    eps_abs: float = EPS_ABS,
    eps_rel: float = EPS_REL,
    max_iter: int = MAX_ITER,
    polish: bool = True,
    warm_dual=None,
) -> QpSolution:
    """Solve a convex QP. Deterministic for fixed inputs.

    ``warm_start`` and ``warm_dual`` seed the primal and dual iterates.
    With ``polish`` the active set guessed by intermediate iterates is tried
    as soon as residuals are near tolerance; a polished point that meets the
    tolerances ends the iteration early.
    """
    if prob.m == 0:
        return _unconstrained(prob)

    n, m = prob.n, prob.m
    D, E, Hs, As = _ruiz(prob.H, prob.A_ineq)
    c = 1.0 / max(1.0, _norm_inf(D * prob.g))
    Hs = c * Hs
    gs = c * D * prob.g
    lbs = np.where(prob.lb > -_INF, E * prob.lb, -np.inf)
    ubs = np.where(prob.ub < _INF, E * prob.ub, np.inf)
    eq = np.isclose(lbs, ubs, rtol=0, atol=1e-12)

    x = np.zeros(n) if warm_start is None else np.asarray(warm_start, dtype=float) / D
    w = np.clip(As @ x, lbs, ubs)
    y = np.zeros(m) if warm_dual is None else c * np.asarray(warm_dual, dtype=float) / E
    rho = _RHO0
    rho_vec = np.where(eq, rho * _RHO_EQ_SCALE, rho)
    ident = np.eye(n)

    def factor(rv):
        return lu_factor(Hs + _SIGMA * ident + As.T @ (rv[:, None] * As))

    lu = factor(rho_vec)
    status = QpStatus.MAX_ITER
    it = 0
    y_prev = y.copy()
    last_active = None
    for it in range(1, max_iter + 1):
        rhs = _SIGMA * x - gs + As.T @ (rho_vec * w - y)
        x_t = lu_solve(lu, rhs)
        w_t = As @ x_t
        x = _ALPHA * x_t + (1.0 - _ALPHA) * x
        w_relax = _ALPHA * w_t + (1.0 - _ALPHA) * w
        w_new = np.clip(w_relax + y / rho_vec, lbs, ubs)
        y_prev = y
        y = y + rho_vec * (w_relax - w_new)
        w = w_new

        if it % _CHECK_EVERY and it != max_iter:
            continue
        z = D * x
        ydual = c ** -1 * E * y
        wz = w / E
        r_p, r_d = residuals(prob, z, ydual)
        e_p, e_d = _tolerances(prob, z, wz, ydual, eps_abs, eps_rel)
        if r_p <= e_p and r_d <= e_d:
            status = QpStatus.SOLVED
            break
        if polish and max(r_p / e_p, r_d / e_d) <= _POLISH_TRIGGER:
            early = _try_polish(prob, z, ydual, eps_abs, eps_rel, last_active)
            if early is not None:
                sig, result = early
                last_active = sig
                if result is not None:
                    zp, yp, rp2, rd2 = result
                    return QpSolution(zp, yp, QpStatus.SOLVED, rp2, rd2, it, polished=True)
        dy = E * (y - y_prev) / c
        ndy = _norm_inf(dy)
        if ndy > 0:
            lb_f = np.where(np.isfinite(prob.lb) & (prob.lb > -_INF), prob.lb, 0.0)
            ub_f = np.where(np.isfinite(prob.ub) & (prob.ub < _INF), prob.ub, 0.0)
            unbounded = np.any((dy > _EPS_INF * ndy) & ~(prob.ub < _INF)) or np.any(
                (dy < -_EPS_INF * ndy) & ~(prob.lb > -_INF)
            )
            support = ub_f @ np.maximum(dy, 0.0) + lb_f @ np.minimum(dy, 0.0)
            if (
                not unbounded
                and _norm_inf(prob.A_ineq.T @ dy) <= _EPS_INF * ndy
                and support <= -_EPS_INF * ndy
            ):
                status = QpStatus.INFEASIBLE
                break
        if it % _ADAPT_EVERY == 0:
            Ax = As @ x
            num = _norm_inf(Ax - w) / max(_norm_inf(Ax), _norm_inf(w), 1e-12)
            den = _norm_inf(Hs @ x + gs + As.T @ y) / max(
                _norm_inf(Hs @ x), _norm_inf(As.T @ y), _norm_inf(gs), 1e-12
            )
            new_rho = float(np.clip(rho * np.sqrt(num / max(den, 1e-12)), _RHO_MIN, _RHO_MAX))
            if new_rho > rho * _ADAPT_TOL or new_rho < rho / _ADAPT_TOL:
                rho = new_rho
                rho_vec = np.where(eq, rho * _RHO_EQ_SCALE, rho)
                lu = factor(rho_vec)

    z = D * x
    ydual = E * y / c
    if status is QpStatus.INFEASIBLE:
        r_p, r_d = residuals(prob, z, ydual)
        return QpSolution(z, ydual, status, r_p, r_d, it)

    r_p, r_d = residuals(prob, z, ydual)
    polished = False
    if polish:
        out = _polish(prob, z, ydual)
        if out is not None:
            zp, yp = out
            rp2, rd2 = residuals(prob, zp, yp)
            if max(rp2, rd2) <= max(r_p, r_d) or (max(rp2, rd2) <= eps_abs):
                z, ydual, r_p, r_d = zp, yp, rp2, rd2
                polished = True
                e_p, e_d = _tolerances(prob, z, np.clip(prob.A_ineq @ z, prob.lb, prob.ub), ydual, eps_abs, eps_rel)
                if r_p <= e_p and r_d <= e_d:
                    status = QpStatus.SOLVED
    return QpSolution(z, ydual, status, r_p, r_d, it, polished=polished)
