"""Learning and certification layers: GP residual models, GP-MPC, CBF and MPSC filters."""

from .base import SafetyFilter
from .cbf import CbfFilter, CbfSpec, cbf_filter, lie_derivatives
from .gp import GpModel, TransitionBuffer, gp_fit, gp_predict, log_marginal_likelihood, residual_dataset
from .gpmpc import (
    GpDynamics,
    GpMpcController,
    coarse_task,
    collect_transitions,
    constraint_margins,
    fit_residual_gp,
    gpmpc_plan,
    state_variances,
)
from .mpsc import MpscConfig, MpscFilter, MpscSource, MpscState, mpsc_filter

__all__ = [
    "CbfFilter",
    "CbfSpec",
    "GpDynamics",
    "GpModel",
    "GpMpcController",
    "MpscConfig",
    "MpscFilter",
    "MpscSource",
    "MpscState",
    "SafetyFilter",
    "TransitionBuffer",
    "cbf_filter",
    "coarse_task",
    "collect_transitions",
    "constraint_margins",
    "fit_residual_gp",
    "gp_fit",
    "gp_predict",
    "gpmpc_plan",
    "lie_derivatives",
    "log_marginal_likelihood",
    "mpsc_filter",
    "residual_dataset",
    "state_variances",
]
