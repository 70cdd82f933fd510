"""Continuous-time models of the cart-pole and the 1D/2D quadrotors.

State orderings:
    cart-pole  [x, x_dot, theta, theta_dot], input [F]
    quad 1D    [z, z_dot], input [T]
    quad 2D    [x, x_dot, z, z_dot, theta, theta_dot], input [T1, T2]

The cart-pole angle is measured from the upright vertical, so
``theta = 0`` is the unstable equilibrium.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from ..errors import DimensionMismatch, NonFiniteState
from ..numopt.linalg import zoh_discretize
from . import kernels


class SystemId(str, enum.Enum):
    CARTPOLE = "cartpole"
    QUAD1D = "quadrotor_1d"
    QUAD2D = "quadrotor_2d"


def _positive(obj):
    for f in fields(obj):
        v = getattr(obj, f.name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ValueError(f"{type(obj).__name__}.{f.name} must be positive, got {v!r}")


@dataclass(frozen=True)
class CartPoleParams:
    m_c: float = 1.0
    m_p: float = 0.1
    l: float = 0.5  # half-length of the pole
    g: float = 9.8

    INERTIAL = ("m_c", "m_p", "l")

    def __post_init__(self):
        _positive(self)

    def kernel_params(self):
        return (self.m_c, self.m_p, self.l, self.g)


@dataclass(frozen=True)
class Quad1DParams:
    m: float = 0.027
    g: float = 9.8

    INERTIAL = ("m",)

    def __post_init__(self):
        _positive(self)

    def kernel_params(self):
        return (self.m, self.g)


@dataclass(frozen=True)
class Quad2DParams:
    m: float = 0.027
    I_yy: float = 1.4e-5
    l_arm: float = 0.0397
    g: float = 9.8

    INERTIAL = ("m", "I_yy")

    def __post_init__(self):
        _positive(self)

    @property
    def d(self) -> float:
        """Effective moment arm of each motor pair."""
        return self.l_arm / math.sqrt(2.0)

    def kernel_params(self):
        return (self.m, self.I_yy, self.d, self.g)


_PARAMS = {SystemId.CARTPOLE: CartPoleParams, SystemId.QUAD1D: Quad1DParams, SystemId.QUAD2D: Quad2DParams}
_DIMS = {SystemId.CARTPOLE: (4, 1), SystemId.QUAD1D: (2, 1), SystemId.QUAD2D: (6, 2)}
_KERNEL = {SystemId.CARTPOLE: kernels.CARTPOLE, SystemId.QUAD1D: kernels.QUAD1D, SystemId.QUAD2D: kernels.QUAD2D}
# state indices that receive the acceleration-level external force
FORCE_CHANNELS = {SystemId.CARTPOLE: (1, 3), SystemId.QUAD1D: (1,), SystemId.QUAD2D: (1, 3, 5)}
STATE_LABELS = {
    SystemId.CARTPOLE: ("x", "x_dot", "theta", "theta_dot"),
    SystemId.QUAD1D: ("z", "z_dot"),
    SystemId.QUAD2D: ("x", "x_dot", "z", "z_dot", "theta", "theta_dot"),
}
INPUT_LABELS = {SystemId.CARTPOLE: ("F",), SystemId.QUAD1D: ("T",), SystemId.QUAD2D: ("T1", "T2")}


@dataclass(frozen=True)
class DynamicsModel:
    """An ODE ``xdot = f(x, u)`` together with its parameter record."""

    system_id: SystemId
    params: object = None

    def __post_init__(self):
        sid = SystemId(self.system_id)
        object.__setattr__(self, "system_id", sid)
        if self.params is None:
            object.__setattr__(self, "params", _PARAMS[sid]())
        elif not isinstance(self.params, _PARAMS[sid]):
            raise TypeError(f"{sid.value} needs {_PARAMS[sid].__name__}, got {type(self.params).__name__}")

    @property
    def n_x(self) -> int:
        return _DIMS[self.system_id][0]

    @property
    def n_u(self) -> int:
        return _DIMS[self.system_id][1]

    @property
    def state_labels(self):
        return STATE_LABELS[self.system_id]

    @property
    def input_labels(self):
        return INPUT_LABELS[self.system_id]

    @property
    def n_force(self) -> int:
        return len(FORCE_CHANNELS[self.system_id])

    def with_params(self, **changes) -> "DynamicsModel":
        return DynamicsModel(self.system_id, replace(self.params, **changes))

    def scaled(self, factor: float) -> "DynamicsModel":
        """Copy with every inertial parameter multiplied by ``factor``."""
        if not factor > 0:
            raise ValueError("scaling factor must be positive")
        p = self.params
        return self.with_params(**{name: getattr(p, name) * factor for name in p.INERTIAL})

    # -- evaluation -------------------------------------------------------

    def _check(self, x, u):
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        if x.size != self.n_x or u.size != self.n_u:
            raise DimensionMismatch(
                f"{self.system_id.value} expects x[{self.n_x}], u[{self.n_u}]; got x[{x.size}], u[{u.size}]"
            )
        return x, u

    def _force(self, extra_force):
        if extra_force is None:
            return (0.0,) * self.n_force
        fe = np.asarray(extra_force, dtype=float).reshape(-1)
        if fe.size != self.n_force:
            raise DimensionMismatch(f"extra_force must have {self.n_force} entries")
        return fe

    def f(self, x, u, extra_force=None) -> np.ndarray:
        x, u = self._check(x, u)
        return np.array(
            kernels.rhs(_KERNEL[self.system_id], self.params.kernel_params(), x, u, self._force(extra_force))
        )

    def jacobians(self, x, u):
        """Analytic ``(df/dx, df/du)``."""
        x, u = self._check(x, u)
        sid = self.system_id
        if sid is SystemId.QUAD1D:
            A = np.array([[0.0, 1.0], [0.0, 0.0]])
            B = np.array([[0.0], [1.0 / self.params.m]])
            return A, B
        if sid is SystemId.QUAD2D:
            p = self.params
            th = x[4]
            thrust = u[0] + u[1]
            s, c = math.sin(th), math.cos(th)
            A = np.zeros((6, 6))
            A[0, 1] = A[2, 3] = A[4, 5] = 1.0
            A[1, 4] = c * thrust / p.m
            A[3, 4] = -s * thrust / p.m
            B = np.zeros((6, 2))
            B[1, :] = s / p.m
            B[3, :] = c / p.m
            B[5, 0] = -p.d / p.I_yy
            B[5, 1] = p.d / p.I_yy
            return A, B
        p = self.params
        m_c, m_p, l, g = p.m_c, p.m_p, p.l, p.g
        total = m_c + m_p
        th, w = x[2], x[3]
        F = u[0]
        s, c = math.sin(th), math.cos(th)
        temp = (F + m_p * l * w * w * s) / total
        den = l * (4.0 / 3.0 - m_p * c * c / total)
        num = g * s - c * temp
        thdd = num / den
        dtemp_dth = m_p * l * w * w * c / total
        dtemp_dw = 2.0 * m_p * l * w * s / total
        dtemp_dF = 1.0 / total
        dnum_dth = g * c + s * temp - c * dtemp_dth
        dden_dth = l * 2.0 * m_p * c * s / total
        dthdd_dth = (dnum_dth * den - num * dden_dth) / (den * den)
        dthdd_dw = -c * dtemp_dw / den
        dthdd_dF = -c * dtemp_dF / den
        k = m_p * l / total
        A = np.zeros((4, 4))
        A[0, 1] = 1.0
        A[2, 3] = 1.0
        A[1, 2] = dtemp_dth - k * (dthdd_dth * c - thdd * s)
        A[1, 3] = dtemp_dw - k * c * dthdd_dw
        A[3, 2] = dthdd_dth
        A[3, 3] = dthdd_dw
        B = np.zeros((4, 1))
        B[1, 0] = dtemp_dF - k * c * dthdd_dF
        B[3, 0] = dthdd_dF
        return A, B

    def rk4_step(self, x, u, dt: float, extra_force=None, substeps: int = 1) -> np.ndarray:
        """Classical RK4 with ``u`` held constant; ``substeps`` steps of ``dt`` each."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        x, u = self._check(x, u)
        xs, ok = kernels.rk4_integrate(
            _KERNEL[self.system_id], self.params.kernel_params(), x, u, float(dt), int(substeps),
            self._force(extra_force),
        )
        if not ok:
            raise NonFiniteState(f"{self.system_id.value} state became non-finite")
        return np.array(xs)

    def linearize_discrete(self, x_ref, u_ref, dt: float):
        """ZOH discretization of the linearization about ``(x_ref, u_ref)``.

        Returns ``(Ad, Bd, offset)`` such that, to first order,
        ``x_next - x_ref = Ad (x - x_ref) + Bd (u - u_ref) + offset`` where
        ``offset = int_0^dt exp(A tau) dtau f(x_ref, u_ref)``; it vanishes at
        equilibria.
        """
        A, B = self.jacobians(x_ref, u_ref)
        f0 = self.f(x_ref, u_ref)
        n, k = B.shape
        Ad, BdAug = zoh_discretize(A, np.hstack([B, f0.reshape(-1, 1)]), dt)
        return Ad, BdAug[:, :k].copy(), BdAug[:, k].copy()

    def equilibrium_input(self) -> np.ndarray:
        p = self.params
        if self.system_id is SystemId.CARTPOLE:
            return np.zeros(1)
        if self.system_id is SystemId.QUAD1D:
            return np.array([p.m * p.g])
        return np.full(2, 0.5 * p.m * p.g)

    def input_bounds(self):
        """Saturation limits: |F| <= 10 N, thrust per motor pair in [0, m g]."""
        p = self.params
        if self.system_id is SystemId.CARTPOLE:
            return np.array([-10.0]), np.array([10.0])
        if self.system_id is SystemId.QUAD1D:
            return np.zeros(1), np.array([2.0 * p.m * p.g])
        return np.zeros(2), np.full(2, p.m * p.g)


def make_model(system, **params) -> DynamicsModel:
    sid = SystemId(system)
    return DynamicsModel(sid, _PARAMS[sid](**params))


def cartpole_energy(params: CartPoleParams, x) -> float:
    """Total mechanical energy of the frictionless cart-pole."""
    m_c, m_p, l, g = params.m_c, params.m_p, params.l, params.g
    xd, th, thd = x[1], x[2], x[3]
    return (
        0.5 * (m_c + m_p) * xd * xd
        + m_p * l * xd * thd * math.cos(th)
        + (2.0 / 3.0) * m_p * l * l * thd * thd
        + m_p * g * l * math.cos(th)
    )
