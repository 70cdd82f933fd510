"""Infinite-horizon LQR about the task equilibrium."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..dynamics.models import DynamicsModel, SystemId
from ..numopt.riccati import solve_care, solve_dare
from .base import Controller


class LqrMode(str, enum.Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


@dataclass(frozen=True)
class LqrPolicy:
    K: np.ndarray
    x_op: np.ndarray
    u_op: np.ndarray
    mode: LqrMode
    P: np.ndarray

    def __call__(self, x, x_ref, u_ref):
        return np.asarray(u_ref, dtype=float) - self.K @ (np.asarray(x, dtype=float) - x_ref)


def equilibrium_state(model: DynamicsModel, x_ref) -> np.ndarray:
    """Equilibrium nearest ``x_ref``: same position, zero rates and attitude."""
    x = np.array(x_ref, dtype=float)
    if model.system_id is SystemId.CARTPOLE:
        x[1:] = 0.0
    elif model.system_id is SystemId.QUAD1D:
        x[1] = 0.0
    else:
        x[[1, 3, 4, 5]] = 0.0
    return x


def lqr_synthesize(prior: DynamicsModel, task, dt: float, mode="discrete") -> LqrPolicy:
    """Gain from the prior linearized about its equilibrium near ``x_ref[0]``.

    The same time-invariant gain serves tracking tasks; the policy is
    evaluated against the moving reference at run time.
    """
    mode = LqrMode(mode)
    x_op = equilibrium_state(prior, task.x_ref[0])
    u_op = prior.equilibrium_input()
    if mode is LqrMode.CONTINUOUS:
        A, B = prior.jacobians(x_op, u_op)
        sol = solve_care(A, B, task.Q, task.R)
    else:
        Ad, Bd, _ = prior.linearize_discrete(x_op, u_op, dt)
        sol = solve_dare(Ad, Bd, task.Q, task.R)
    return LqrPolicy(sol.K, x_op, u_op, mode, sol.P)


class LqrController(Controller):
    name = "lqr"

    def __init__(self, mode="discrete"):
        self.mode = LqrMode(mode)
        self.policy = None

    def reset(self, reset_info, seed=0, episode=0):
        super().reset(reset_info, seed, episode)
        self.policy = lqr_synthesize(reset_info.prior_model, reset_info.task, reset_info.dt, self.mode)

    def act(self, obs, step):
        task = self.info.task
        x = np.asarray(obs, dtype=float)[: task.n_x]
        return self.policy(x, task.ref_state(step), task.ref_input(step))


def finite_horizon_lqr(Ad, Bd, Q, R, Qf, N: int):
    """Backward Riccati recursion; returns ``(gains K_0..K_{N-1}, P_0)`` for ``u_i = -K_i x_i``."""
    P = np.asarray(Qf, dtype=float)
    gains = [None] * N
    for i in range(N - 1, -1, -1):
        S = R + Bd.T @ P @ Bd
        K = np.linalg.solve(S, Bd.T @ P @ Ad)
        P = Q + Ad.T @ P @ (Ad - Bd @ K)
        P = 0.5 * (P + P.T)
        gains[i] = K
    return gains, P
