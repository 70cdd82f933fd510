"""Dense numerical core: QP, Riccati equations, ZOH discretization, Cholesky solves."""

from .linalg import chol_factor, chol_solve, expm, solve_lyapunov, solve_stein, zoh_discretize
from .qp import QpProblem, QpSolution, QpStatus, solve_qp
from .riccati import RiccatiSolution, care_residual, dare_residual, solve_care, solve_dare

__all__ = [
    "QpProblem",
    "QpSolution",
    "QpStatus",
    "RiccatiSolution",
    "care_residual",
    "chol_factor",
    "chol_solve",
    "dare_residual",
    "expm",
    "solve_care",
    "solve_dare",
    "solve_lyapunov",
    "solve_qp",
    "solve_stein",
    "zoh_discretize",
]
