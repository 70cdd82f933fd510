"""Shared controller plumbing: the controller interface and discrete prediction models."""

from __future__ import annotations

import numpy as np

from ..dynamics.models import DynamicsModel


class Controller:
    """Base interface. ``reset`` receives the environment's ``ResetInfo``."""

    name = "controller"

    def reset(self, reset_info, seed: int = 0, episode: int = 0) -> None:
        self.info = reset_info

    def act(self, obs, step: int) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def diagnostics(self) -> dict:
        return {}


class ZeroController(Controller):
    """Applies the task's reference input (zero effort for the cart-pole)."""

    name = "none"

    def act(self, obs, step):
        return np.array(self.info.task.ref_input(step), dtype=float)


def rk4_jacobians(model: DynamicsModel, x, u, dt: float):
    """Next state and exact Jacobians of a single RK4 step of size ``dt``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    n, m = x.size, u.size
    ident = np.eye(n)
    h = dt
    k1 = model.f(x, u)
    A1, B1 = model.jacobians(x, u)
    x2 = x + 0.5 * h * k1
    dx2 = ident + 0.5 * h * A1
    du2 = 0.5 * h * B1
    k2 = model.f(x2, u)
    A2, B2 = model.jacobians(x2, u)
    dk2x, dk2u = A2 @ dx2, A2 @ du2 + B2
    x3 = x + 0.5 * h * k2
    dx3 = ident + 0.5 * h * dk2x
    du3 = 0.5 * h * dk2u
    k3 = model.f(x3, u)
    A3, B3 = model.jacobians(x3, u)
    dk3x, dk3u = A3 @ dx3, A3 @ du3 + B3
    x4 = x + h * k3
    dx4 = ident + h * dk3x
    du4 = h * dk3u
    k4 = model.f(x4, u)
    A4, B4 = model.jacobians(x4, u)
    dk4x, dk4u = A4 @ dx4, A4 @ du4 + B4
    x_next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    Ad = ident + (h / 6.0) * (A1 + 2.0 * dk2x + 2.0 * dk3x + dk4x)
    Bd = (h / 6.0) * (B1 + 2.0 * dk2u + 2.0 * dk3u + dk4u)
    return x_next, Ad, Bd


class Rk4Model:
    """Discrete prediction model: ``substeps`` RK4 steps of the prior per control interval."""

    def __init__(self, model: DynamicsModel, dt: float, substeps: int = 1):
        self.model = model
        self.dt = dt
        self.substeps = int(substeps)
        self.h = dt / self.substeps
        self.n_x = model.n_x
        self.n_u = model.n_u

    def step(self, x, u):
        return self.model.rk4_step(x, u, self.h, substeps=self.substeps)

    def linearize(self, x, u):
        """``(x_next, A, B)`` at ``(x, u)``."""
        if self.substeps == 1:
            return rk4_jacobians(self.model, x, u, self.dt)
        A = np.eye(self.n_x)
        B = np.zeros((self.n_x, self.n_u))
        for _ in range(self.substeps):
            x, As, Bs = rk4_jacobians(self.model, x, u, self.h)
            A = As @ A
            B = As @ B + Bs
        return x, A, B

    def variance(self, x, u):
        return np.zeros(self.n_x)
