"""Model-based baselines consuming the prior model handed out on reset."""

from .base import Controller, Rk4Model, ZeroController, rk4_jacobians
from .ilqr import IlqrController, IlqrSolution, ilqr_solve, trajectory_cost
from .lqr import LqrController, LqrMode, LqrPolicy, equilibrium_state, finite_horizon_lqr, lqr_synthesize
from .mpc import MpcConfig, MpcController, MpcMode, MpcResult, mpc_solve, terminal_weight
from .pid import PidController, PidGains, pid_act

__all__ = [
    "Controller",
    "IlqrController",
    "IlqrSolution",
    "LqrController",
    "LqrMode",
    "LqrPolicy",
    "MpcConfig",
    "MpcController",
    "MpcMode",
    "MpcResult",
    "PidController",
    "PidGains",
    "Rk4Model",
    "ZeroController",
    "equilibrium_state",
    "finite_horizon_lqr",
    "ilqr_solve",
    "lqr_synthesize",
    "mpc_solve",
    "pid_act",
    "rk4_jacobians",
    "terminal_weight",
    "trajectory_cost",
]
