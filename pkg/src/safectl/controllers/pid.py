"""Cascaded PID for the quadrotors: position loop to thrust, pitch loop to differential thrust."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dynamics.models import SystemId
from ..errors import UnsupportedSystem
from .base import Controller


@dataclass(frozen=True)
class PidGains:
    kp_pos: float = 4.0
    kd_pos: float = 3.0
    ki_pos: float = 0.5
    kp_att: float = 100.0
    kd_att: float = 20.0
    i_limit: float = 2.0  # clamp on the integrated position error (m*s)


def _position_accel(gains, err, derr, integ):
    return gains.kp_pos * err + gains.kd_pos * derr + gains.ki_pos * integ


def pid_act(gains: PidGains, prior, x, x_ref, integ, a_ff=None) -> np.ndarray:
    """One cascade evaluation.

    ``integ`` holds integrated position errors ([z] or [x, z]); ``a_ff`` is
    the reference acceleration on the same channels (zero if omitted).
    """
    p = prior.params
    sid = prior.system_id
    if a_ff is None:
        a_ff = np.zeros(len(integ))
    if sid is SystemId.QUAD1D:
        a_z = a_ff[0] + _position_accel(gains, x_ref[0] - x[0], x_ref[1] - x[1], integ[0])
        return np.array([p.m * (p.g + a_z)])
    if sid is not SystemId.QUAD2D:
        raise UnsupportedSystem(f"PID is defined for the quadrotors, not {sid.value}")
    a_x = a_ff[0] + _position_accel(gains, x_ref[0] - x[0], x_ref[1] - x[1], integ[0])
    a_z = a_ff[1] + _position_accel(gains, x_ref[2] - x[2], x_ref[3] - x[3], integ[1])
    vertical = p.g + a_z
    theta_des = math.atan2(a_x, vertical)
    thrust = p.m * math.hypot(a_x, vertical)
    theta_dd = gains.kp_att * (theta_des - x[4]) - gains.kd_att * x[5]
    delta = p.I_yy * theta_dd / p.d  # T2 - T1
    return np.array([0.5 * (thrust - delta), 0.5 * (thrust + delta)])


class PidController(Controller):
    name = "pid"

    def __init__(self, gains: PidGains | None = None, **overrides):
        base = gains or PidGains()
        self.gains = PidGains(**{**base.__dict__, **overrides})
        self.integ = None

    def reset(self, reset_info, seed=0, episode=0):
        super().reset(reset_info, seed, episode)
        sid = reset_info.prior_model.system_id
        if sid is SystemId.CARTPOLE:
            raise UnsupportedSystem("PID is defined for the quadrotors only")
        self.pos_idx = [0] if sid is SystemId.QUAD1D else [0, 2]
        self.integ = np.zeros(len(self.pos_idx))

    def act(self, obs, step):
        task = self.info.task
        x = np.asarray(obs, dtype=float)[: task.n_x]
        x_ref = task.ref_state(step)
        # reference acceleration by forward difference of the velocity references
        vel = [i + 1 for i in self.pos_idx]
        a_ff = (task.ref_state(step + 1)[vel] - x_ref[vel]) / self.info.dt
        u = pid_act(self.gains, self.info.prior_model, x, x_ref, self.integ, a_ff)
        lim = self.gains.i_limit
        self.integ = np.clip(self.integ + (x_ref[self.pos_idx] - x[self.pos_idx]) * self.info.dt, -lim, lim)
        return u
