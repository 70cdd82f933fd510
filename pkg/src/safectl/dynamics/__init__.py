"""Closed-form dynamics, analytic Jacobians and RK4 integration."""

from .kernels import BACKEND
from .models import (
    CartPoleParams,
    DynamicsModel,
    Quad1DParams,
    Quad2DParams,
    SystemId,
    cartpole_energy,
    make_model,
)

__all__ = [
    "BACKEND",
    "CartPoleParams",
    "DynamicsModel",
    "Quad1DParams",
    "Quad2DParams",
    "SystemId",
    "cartpole_energy",
    "make_model",
]
