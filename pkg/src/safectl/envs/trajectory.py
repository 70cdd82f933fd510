"""Reference trajectory generation for tracking tasks.

Shapes are planar curves ``(a(t), b(t))``: ``a`` is the horizontal
coordinate, ``b`` the vertical offset from the hover altitude. The 2D
quadrotor tracks both, the 1D quadrotor the vertical projection, the
cart-pole the horizontal projection.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from ..dynamics.models import DynamicsModel, SystemId
from ..errors import UnsupportedShape

SQUARE_RAMP_FRACTION = 0.05


class Shape(str, enum.Enum):
    CIRCLE = "circle"
    SINE = "sine"
    LEMNISCATE = "lemniscate"
    SQUARE = "square"


def _circle(t, s, w):
    return (s * math.cos(w * t), s * math.sin(w * t), -s * w * math.sin(w * t), s * w * math.cos(w * t))


def _sine(t, s, w):
    a = s * math.sin(w * t)
    da = s * w * math.cos(w * t)
    return (a, a, da, da)


def _lemniscate(t, s, w):
    # Gerono lemniscate
    sn, cs = math.sin(w * t), math.cos(w * t)
    return (s * sn, s * sn * cs, s * w * cs, s * w * (cs * cs - sn * sn))


# corners of the square path, starting mid-way up the right edge
def _square_point(sigma, s):
    if sigma < s:
        return s, sigma
    if sigma < 3 * s:
        return s - (sigma - s), s
    if sigma < 5 * s:
        return -s, s - (sigma - 3 * s)
    if sigma < 7 * s:
        return -s + (sigma - 5 * s), -s
    return s, -s + (sigma - 7 * s)


_SQUARE_DIRS = ((0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 0.0), (0.0, 1.0))
_SQUARE_BREAKS = (1.0, 3.0, 5.0, 7.0)  # corner arc lengths in units of s


def _square(t, s, period):
    speed = 8.0 * s / period
    tau = t % period
    sigma = speed * tau
    a, b = _square_point(sigma, s)
    seg = sum(sigma >= k * s for k in _SQUARE_BREAKS)
    va, vb = _SQUARE_DIRS[seg]
    half = 0.5 * SQUARE_RAMP_FRACTION * period / 4.0
    for k, brk in enumerate(_SQUARE_BREAKS):
        tc = brk * s / speed
        if abs(tau - tc) < half:
            lam = (tau - tc + half) / (2.0 * half)
            (pa, pb), (na, nb) = _SQUARE_DIRS[k], _SQUARE_DIRS[k + 1]
            va, vb = (1 - lam) * pa + lam * na, (1 - lam) * pb + lam * nb
            break
    return a, b, speed * va, speed * vb


def planar_point(shape: Shape, t: float, scale: float, period: float):
    """Position and velocity ``(a, b, a_dot, b_dot)`` of the shape at time ``t``."""
    shape = Shape(shape)
    w = 2.0 * math.pi / period
    if shape is Shape.CIRCLE:
        return _circle(t, scale, w)
    if shape is Shape.SINE:
        return _sine(t, scale, w)
    if shape is Shape.LEMNISCATE:
        return _lemniscate(t, scale, w)
    return _square(t, scale, period)


def generate_trajectory(
    shape,
    scale: float,
    period: float,
    L: int,
    dt: float,
    model: DynamicsModel,
    altitude: float = 1.0,
):
    """Sample references at control steps.

    Returns ``(x_ref, u_ref)`` with shapes ``(L+1, n_x)`` and ``(L, n_u)``;
    ``u_ref`` is the equilibrium input at every step.
    """
    try:
        shape = Shape(shape)
    except ValueError as exc:
        raise UnsupportedShape(f"unknown trajectory shape {shape!r}") from exc
    if not (scale > 0 and period > 0):
        raise ValueError("scale and period must be positive")
    sid = model.system_id
    x_ref = np.zeros((L + 1, model.n_x))
    for i in range(L + 1):
        a, b, da, db = planar_point(shape, i * dt, scale, period)
        if sid is SystemId.QUAD2D:
            x_ref[i, :4] = (a, da, altitude + b, db)
        elif sid is SystemId.QUAD1D:
            x_ref[i] = (altitude + b, db)
        elif sid is SystemId.CARTPOLE:
            x_ref[i, :2] = (a, da)
        else:  # pragma: no cover
            raise UnsupportedShape(f"no projection of {shape.value} for {sid}")
    u_ref = np.tile(model.equilibrium_input(), (L, 1))
    return x_ref, u_ref
