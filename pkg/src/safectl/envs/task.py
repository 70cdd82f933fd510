"""Stabilization and tracking objectives and the quadratic episode cost."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..dynamics.models import DynamicsModel, SystemId
from ..errors import DimensionMismatch
from .trajectory import generate_trajectory

DEFAULT_THETA_MAX = 0.2094  # 12 degrees
DEFAULT_L = 250


class TaskKind(str, enum.Enum):
    STABILIZATION = "stabilization"
    TRACKING = "tracking"


class RewardKind(str, enum.Enum):
    QUADRATIC = "quadratic"
    SPARSE = "sparse"


@dataclass(frozen=True, eq=False)
class TaskSpec:
    kind: TaskKind
    x_ref: np.ndarray  # (L+1, n_x)
    u_ref: np.ndarray  # (L, n_u)
    Q: np.ndarray
    R: np.ndarray
    L: int
    theta_max: float = DEFAULT_THETA_MAX
    reward: RewardKind = RewardKind.QUADRATIC

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind(self.kind))
        object.__setattr__(self, "reward", RewardKind(self.reward))
        x_ref = np.atleast_2d(np.asarray(self.x_ref, dtype=float))
        u_ref = np.atleast_2d(np.asarray(self.u_ref, dtype=float))
        if x_ref.shape[0] != self.L + 1 or u_ref.shape[0] != self.L:
            raise DimensionMismatch(f"references must have L+1={self.L + 1} states and L={self.L} inputs")
        n_x, n_u = x_ref.shape[1], u_ref.shape[1]
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if Q.shape != (n_x, n_x) or R.shape != (n_u, n_u):
            raise DimensionMismatch("Q must be n_x x n_x and R n_u x n_u")
        x_ref.setflags(write=False)
        u_ref.setflags(write=False)
        for name, val in (("x_ref", x_ref), ("u_ref", u_ref), ("Q", Q), ("R", R)):
            object.__setattr__(self, name, val)

    @property
    def n_x(self) -> int:
        return self.x_ref.shape[1]

    @property
    def n_u(self) -> int:
        return self.u_ref.shape[1]

    def ref_state(self, i: int) -> np.ndarray:
        return self.x_ref[min(i, self.L)]

    def ref_input(self, i: int) -> np.ndarray:
        return self.u_ref[min(i, self.L - 1)]

    def stage_cost(self, i: int, x, u) -> float:
        dx = np.asarray(x, dtype=float) - self.x_ref[i]
        du = np.asarray(u, dtype=float) - self.u_ref[i]
        return 0.5 * float(dx @ self.Q @ dx) + 0.5 * float(du @ self.R @ du)

    def terminal_cost(self, i: int, x) -> float:
        dx = np.asarray(x, dtype=float) - self.x_ref[i]
        return 0.5 * float(dx @ self.Q @ dx)


def quadratic_cost(task: TaskSpec, states, inputs) -> float:
    """``1/2 sum_i (x_i - x_ref_i)^T Q (...) + 1/2 sum_i (u_i - u_ref_i)^T R (...)``.

    Accepts truncated traces (``k+1`` states and ``k`` inputs, ``k <= L``).
    """
    X = np.atleast_2d(np.asarray(states, dtype=float))
    U = np.asarray(inputs, dtype=float).reshape(-1, task.n_u) if np.size(inputs) else np.zeros((0, task.n_u))
    k = U.shape[0]
    if X.shape != (k + 1, task.n_x) or k > task.L:
        raise DimensionMismatch(f"trace needs k+1 states and k inputs (k <= {task.L})")
    dX = X - task.x_ref[: k + 1]
    dU = U - task.u_ref[:k]
    return 0.5 * float(np.einsum("ij,jk,ik->", dX, task.Q, dX)) + 0.5 * float(np.einsum("ij,jk,ik->", dU, task.R, dU))


DEFAULT_WEIGHTS = {
    SystemId.CARTPOLE: (np.diag([10.0, 1.0, 10.0, 1.0]), np.diag([0.1])),
    SystemId.QUAD1D: (np.diag([1.0, 1.0]), np.diag([1.0])),
    SystemId.QUAD2D: (np.diag([1.0, 0.1, 1.0, 0.1, 0.1, 0.01]), np.diag([1.0, 1.0])),
}

DEFAULT_GOAL = {
    SystemId.CARTPOLE: np.zeros(4),
    SystemId.QUAD1D: np.array([1.0, 0.0]),
    SystemId.QUAD2D: np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
}


def make_task(
    model: DynamicsModel,
    kind="stabilization",
    L: int = DEFAULT_L,
    dt: float = 0.02,
    Q=None,
    R=None,
    goal=None,
    trajectory: dict | None = None,
    theta_max: float = DEFAULT_THETA_MAX,
    reward="quadratic",
) -> TaskSpec:
    """Build a task for ``model`` (whose equilibrium input defines ``u_ref``)."""
    kind = TaskKind(kind)
    Q0, R0 = DEFAULT_WEIGHTS[model.system_id]
    Q = Q0 if Q is None else np.asarray(Q, dtype=float)
    R = R0 if R is None else np.asarray(R, dtype=float)
    if Q.ndim == 1:
        Q = np.diag(Q)
    if R.ndim == 1:
        R = np.diag(R)
    if kind is TaskKind.STABILIZATION:
        g = DEFAULT_GOAL[model.system_id] if goal is None else np.asarray(goal, dtype=float)
        x_ref = np.tile(g, (L + 1, 1))
        u_ref = np.tile(model.equilibrium_input(), (L, 1))
    else:
        traj = dict(trajectory or {})
        x_ref, u_ref = generate_trajectory(
            traj.get("shape", "circle"),
            traj.get("scale", 1.0),
            traj.get("period", 5.0),
            L,
            dt,
            model,
            altitude=traj.get("altitude", 1.0),
        )
    return TaskSpec(kind, x_ref, u_ref, Q, R, L, theta_max=theta_max, reward=reward)
