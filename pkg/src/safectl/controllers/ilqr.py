"""Iterative LQR over the task horizon with Levenberg-Marquardt regularization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import Diverged, NonFiniteState
from .base import Controller, Rk4Model
from .lqr import lqr_synthesize

MU_MIN = 1e-6
MU_MAX = 1e6
MU_FACTOR = 10.0
ARMIJO = 1e-4
BACKTRACK = 0.5
MIN_STEP = 2.0**-20


@dataclass
class IlqrSolution:
    X: np.ndarray  # (N+1, n_x)
    U: np.ndarray  # (N, n_u)
    K: np.ndarray  # (N, n_u, n_x)
    k: np.ndarray  # (N, n_u)
    cost: float
    iterations: int
    costs: list = field(default_factory=list)
    converged: bool = False


def trajectory_cost(task, X, U, start: int = 0) -> float:
    """Quadratic cost of a trajectory segment, terminal weight ``Q``."""
    N = U.shape[0]
    dX = X - task.x_ref[start : start + N + 1]
    dU = U - task.u_ref[start : start + N]
    return 0.5 * float(np.einsum("ij,jk,ik->", dX, task.Q, dX)) + 0.5 * float(np.einsum("ij,jk,ik->", dU, task.R, dU))


def _rollout(model, x0, U, X_prev=None, K=None, k=None, alpha=1.0):
    N = U.shape[0]
    X = np.empty((N + 1, x0.size))
    Unew = np.empty_like(U)
    X[0] = x0
    for i in range(N):
        u = U[i]
        if K is not None:
            u = u + alpha * k[i] + K[i] @ (X[i] - X_prev[i])
        Unew[i] = u
        X[i + 1] = model.step(X[i], u)
    return X, Unew


def _backward(model, task, X, U, mu, start):
    N, n_u = U.shape
    n_x = X.shape[1]
    Q, R = task.Q, task.R
    Vx = Q @ (X[N] - task.x_ref[start + N])
    Vxx = Q.copy()
    K = np.zeros((N, n_u, n_x))
    k = np.zeros((N, n_u))
    dv1 = dv2 = 0.0
    eye = np.eye(n_x)
    for i in range(N - 1, -1, -1):
        _, A, B = model.linearize(X[i], U[i])
        lx = Q @ (X[i] - task.x_ref[start + i])
        lu = R @ (U[i] - task.u_ref[start + i])
        Qx = lx + A.T @ Vx
        Qu = lu + B.T @ Vx
        Vreg = Vxx + mu * eye
        Qxx = Q + A.T @ Vxx @ A
        Quu = R + B.T @ Vreg @ B
        Qux = B.T @ Vreg @ A
        try:
            L = np.linalg.cholesky(0.5 * (Quu + Quu.T))
        except np.linalg.LinAlgError:
            return None
        ki = -np.linalg.solve(L.T, np.linalg.solve(L, Qu))
        Ki = -np.linalg.solve(L.T, np.linalg.solve(L, Qux))
        K[i], k[i] = Ki, ki
        dv1 += float(ki @ Qu)
        dv2 += 0.5 * float(ki @ Quu @ ki)
        Vx = Qx + Ki.T @ Quu @ ki + Ki.T @ Qu + Qux.T @ ki
        Vxx = Qxx + Ki.T @ Quu @ Ki + Ki.T @ Qux + Qux.T @ Ki
        Vxx = 0.5 * (Vxx + Vxx.T)
    return K, k, dv1, dv2


def _seed_rollout(model, task, x0, U, K0, start):
    """Initial rollout closed around the reference with a fixed gain: ``u_i = U_i - K0 (x_i - x_ref_i)``."""
    N = U.shape[0]
    X = np.empty((N + 1, x0.size))
    Unew = np.empty_like(U)
    X[0] = x0
    for i in range(N):
        Unew[i] = U[i] - K0 @ (X[i] - task.x_ref[start + i])
        X[i + 1] = model.step(X[i], Unew[i])
    return X, Unew


def ilqr_solve(prior, task, x0, dt: float, max_iter: int = 50, U_init=None, start: int = 0, horizon=None, tol=1e-6,
               K_init=None):
    """Optimize the input sequence from ``x0`` over steps ``start .. start+horizon``.

    The prediction model is one RK4 step of the prior per control interval.
    ``K_init`` closes the first rollout with a fixed feedback gain, which keeps
    long horizons on unstable systems away from poor local minima.
    Raises ``Diverged`` when the regularization ladder is exhausted.
    """
    model = Rk4Model(prior, dt)
    N = task.L - start if horizon is None else int(horizon)
    x0 = np.asarray(x0, dtype=float)
    U = np.array(task.u_ref[start : start + N] if U_init is None else U_init, dtype=float).reshape(N, -1)
    if K_init is None:
        X, U = _rollout(model, x0, U)
    else:
        X, U = _seed_rollout(model, task, x0, U, np.atleast_2d(K_init), start)
    J = trajectory_cost(task, X, U, start)
    costs = [J]
    mu = 0.0
    K = np.zeros((N, U.shape[1], x0.size))
    k = np.zeros_like(U)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        back = _backward(model, task, X, U, mu, start)
        if back is None:
            mu = _raise_mu(mu)
            continue
        K, k, dv1, dv2 = back
        if -dv1 <= tol * max(J, 1e-12) * 1e-3:
            # already stationary
            converged = True
            break
        alpha = 1.0
        accepted = False
        while alpha >= MIN_STEP:
            try:
                Xn, Un = _rollout(model, x0, U, X, K, k, alpha)
                Jn = trajectory_cost(task, Xn, Un, start)
            except NonFiniteState:
                Jn = np.inf
            expected = -(alpha * dv1 + alpha * alpha * dv2)
            if np.isfinite(Jn) and J - Jn >= ARMIJO * expected:
                accepted = True
                break
            alpha *= BACKTRACK
        if not accepted:
            mu = _raise_mu(mu)
            continue
        rel = (J - Jn) / max(J, 1e-300)
        X, U, J = Xn, Un, Jn
        costs.append(J)
        mu = mu / MU_FACTOR if mu / MU_FACTOR >= MU_MIN else 0.0
        if rel < tol:
            converged = True
            break
    return IlqrSolution(X, U, K, k, J, it, costs, converged)


def _raise_mu(mu):
    mu = MU_MIN if mu == 0.0 else mu * MU_FACTOR
    if mu > MU_MAX:
        raise Diverged("iLQR regularization exceeded its ceiling")
    return mu


class IlqrController(Controller):
    """Plans once per episode from the initial observation and tracks the plan with its local gains.

    The first rollout is closed with the prior's discrete LQR gain.
    """

    name = "ilqr"

    def __init__(self, max_iter: int = 50):
        self.max_iter = max_iter
        self.solution = None

    def reset(self, reset_info, seed=0, episode=0):
        super().reset(reset_info, seed, episode)
        self.solution = None

    def act(self, obs, step):
        task = self.info.task
        x = np.asarray(obs, dtype=float)[: task.n_x]
        if self.solution is None:
            K0 = lqr_synthesize(self.info.prior_model, task, self.info.dt).K
            self.solution = ilqr_solve(self.info.prior_model, task, x, self.info.dt, self.max_iter, K_init=K0)
        sol = self.solution
        i = min(step, sol.U.shape[0] - 1)
        return sol.U[i] + sol.K[i] @ (x - sol.X[i])

    def diagnostics(self):
        if self.solution is None:
            return {}
        return {"ilqr_cost": self.solution.cost, "ilqr_iterations": self.solution.iterations}
