"""Control-barrier-function QP filter for control-affine models.

The barrier is a quadratic form over selected state channels,
``h(x) = r - (v - c)^T P (v - c)`` with ``v = x[selector]``; the safe set is
``h >= 0``. The filter enforces ``dh/dt >= -gamma h`` on the prior model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..constraints import ConstraintSpec, Form, Target
from ..numopt.qp import QpProblem, QpStatus, solve_qp
from .base import SafetyFilter

DEFAULT_GAMMA = 5.0
MODIFIED_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CbfSpec:
    selector: tuple
    P: np.ndarray
    r: float
    center: np.ndarray | None = None
    gamma: float = DEFAULT_GAMMA
    slack_penalty: float = 1e6

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        object.__setattr__(self, "P", 0.5 * (P + P.T))
        object.__setattr__(self, "selector", tuple(int(i) for i in self.selector))
        c = np.zeros(len(self.selector)) if self.center is None else np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", c)
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @classmethod
    def from_constraint(cls, spec: ConstraintSpec, gamma: float = DEFAULT_GAMMA, **kw) -> "CbfSpec":
        """Barrier matching a quadratic state constraint ``v^T P v <= r``."""
        if spec.form is not Form.QUADRATIC or spec.target is not Target.STATE:
            raise ValueError("a barrier needs a quadratic state constraint")
        return cls(spec.selector, spec.P, spec.r - spec.margin, gamma=gamma, **kw)

    def h(self, x) -> float:
        v = np.asarray(x, dtype=float)[list(self.selector)] - self.center
        return float(self.r - v @ self.P @ v)

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = x[list(self.selector)] - self.center
        g = np.zeros(x.size)
        g[list(self.selector)] = -2.0 * (self.P @ v)
        return g


def lie_derivatives(spec: CbfSpec, prior, x):
    """``(L_f h, L_g h)`` for the control-affine prior ``f(x) + g(x) u``."""
    x = np.asarray(x, dtype=float)
    u0 = np.zeros(prior.n_u)
    grad = spec.grad(x)
    _, B = prior.jacobians(x, u0)
    return float(grad @ prior.f(x, u0)), grad @ B


def cbf_filter(spec: CbfSpec, prior, u_proposed, x, input_bounds=None):
    """Minimally modify ``u_proposed`` so that ``dh/dt >= -gamma h``.

    Returns ``(u_safe, modified)``; falls back to a slack-relaxed QP if the
    barrier condition and input bounds conflict.
    """
    u_p = np.asarray(u_proposed, dtype=float).reshape(-1)
    lf, lg = lie_derivatives(spec, prior, x)
    rhs = lf + spec.gamma * spec.h(x)
    lo, hi = (np.full(u_p.size, -np.inf), np.full(u_p.size, np.inf)) if input_bounds is None else input_bounds
    if lf + lg @ u_p + spec.gamma * spec.h(x) >= 0.0 and np.all(u_p >= lo) and np.all(u_p <= hi):
        return u_p.copy(), False
    n = u_p.size
    A = np.vstack([-lg[None, :], np.eye(n)])
    prob = QpProblem(np.eye(n), -u_p, A, np.concatenate([[-np.inf], lo]), np.concatenate([[rhs], hi]))
    sol = solve_qp(prob)
    if sol.status is QpStatus.SOLVED:
        u = sol.z_star
    else:
        # slack s >= 0 relaxes the barrier row: -lg u - s <= rhs
        H = np.zeros((n + 1, n + 1))
        H[:n, :n] = np.eye(n)
        H[n, n] = spec.slack_penalty
        g = np.concatenate([-u_p, [spec.slack_penalty]])
        A2 = np.zeros((n + 2, n + 1))
        A2[0, :n] = -lg
        A2[0, n] = -1.0
        A2[1 : n + 1, :n] = np.eye(n)
        A2[n + 1, n] = 1.0
        prob = QpProblem(H, g, A2, np.concatenate([[-np.inf], lo, [0.0]]), np.concatenate([[rhs], hi, [np.inf]]))
        u = solve_qp(prob).z_star[:n]
    u = np.clip(u, lo, hi)
    return u, bool(np.max(np.abs(u - u_p)) > MODIFIED_TOL)


class CbfFilter(SafetyFilter):
    """Uses ``spec`` or, if omitted, the first quadratic state constraint of the environment."""

    name = "cbf"

    def __init__(self, spec: CbfSpec | None = None, gamma: float = DEFAULT_GAMMA):
        self.spec_arg = spec
        self.gamma = gamma

    def reset(self, reset_info, seed=0, episode=0):
        super().reset(reset_info, seed, episode)
        spec = self.spec_arg
        if spec is None:
            quad = [s for s in reset_info.constraints.specs if s.form is Form.QUADRATIC and s.target is Target.STATE]
            if not quad:
                raise ValueError("CBF filter needs a CbfSpec or a quadratic state constraint")
            spec = CbfSpec.from_constraint(quad[0], gamma=self.gamma)
        self.spec = spec
        self.bounds = (reset_info.input_low, reset_info.input_high)

    def filter(self, obs, u_proposed, step):
        x = np.asarray(obs, dtype=float)[: self.info.task.n_x]
        return cbf_filter(self.spec, self.info.prior_model, u_proposed, x, self.bounds)
