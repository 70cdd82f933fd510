"""Dense linear-algebra helpers: matrix exponential, ZOH discretization,
jittered Cholesky solves and small Lyapunov/Stein equation solvers."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..errors import NotPD

# Pade(6,6) numerator coefficients; denominator uses alternating signs.
_PADE6 = (1.0, 1.0 / 2, 5.0 / 44, 1.0 / 66, 1.0 / 792, 1.0 / 15840, 1.0 / 665280)
_EXPM_THETA = 0.5


def expm(M: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a degree-6 Pade approximant.

    The argument is scaled by ``2**-s`` so that its 1-norm is at most 0.5, the
    rational approximant is evaluated, and the result squared ``s`` times.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    norm = np.abs(M).sum(axis=0).max() if n else 0.0
    s = 0
    if norm > _EXPM_THETA:
        s = int(np.ceil(np.log2(norm / _EXPM_THETA)))
    X = M / (2.0**s)
    ident = np.eye(n)
    X2 = X @ X
    X4 = X2 @ X2
    X6 = X4 @ X2
    c = _PADE6
    even = c[0] * ident + c[2] * X2 + c[4] * X4 + c[6] * X6
    odd = X @ (c[1] * ident + c[3] * X2 + c[5] * X4)
    E = np.linalg.solve(even - odd, even + odd)
    for _ in range(s):
        E = E @ E
    return E


def zoh_discretize(A, B, dt: float):
    """Exact zero-order-hold discretization of ``xdot = A x + B u``.

    Returns ``(Ad, Bd)`` with ``Ad = exp(A dt)`` and
    ``Bd = int_0^dt exp(A tau) dtau B`` read off the exponential of the
    augmented matrix ``[[A, B], [0, 0]] dt``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    n, k = B.shape
    aug = np.zeros((n + k, n + k))
    aug[:n, :n] = A * dt
    aug[:n, n:] = B * dt
    E = expm(aug)
    return E[:n, :n].copy(), E[:n, n:].copy()


def zoh_input_integral(A, dt: float) -> np.ndarray:
    """``int_0^dt exp(A tau) dtau`` (used for the affine term of a linearization)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    _, Phi = zoh_discretize(A, np.eye(A.shape[0]), dt)
    return Phi


def chol_factor(M, max_retries: int = 5):
    """Cholesky factor of ``M`` with an escalating diagonal jitter.

    The first attempt is unjittered. Retries add ``1e-10 * trace(M)/n``,
    multiplied by ten per retry, up to ``max_retries`` times.
    Returns ``(factor, jitter_used)`` where ``factor`` is the scipy
    ``cho_factor`` tuple.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    base = 1e-10 * max(np.trace(M) / max(n, 1), np.finfo(float).tiny)
    jitter = 0.0
    for attempt in range(max_retries + 1):
        try:
            cf = cho_factor(M + jitter * np.eye(n), lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError):
            jitter = base * 10.0**attempt
            continue
        return cf, jitter
    raise NotPD(f"matrix not positive definite after {max_retries} jitter retries")


def chol_solve(M, Y, max_retries: int = 5) -> np.ndarray:
    """Solve ``M X = Y`` for symmetric positive definite ``M``."""
    cf, _ = chol_factor(M, max_retries=max_retries)
    return cho_solve(cf, np.asarray(Y, dtype=float))


def solve_lyapunov(A, Q) -> np.ndarray:
    """Solve ``A^T X + X A + Q = 0`` by vectorization (small n only)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    ident = np.eye(n)
    L = np.kron(ident, A.T) + np.kron(A.T, ident)
    x = np.linalg.solve(L, -np.asarray(Q, dtype=float).reshape(-1, order="F"))
    X = x.reshape(n, n, order="F")
    return 0.5 * (X + X.T)


def solve_stein(A, Q) -> np.ndarray:
    """Solve ``A^T X A - X + Q = 0`` by vectorization (small n only)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    L = np.kron(A.T, A.T) - np.eye(n * n)
    x = np.linalg.solve(L, -np.asarray(Q, dtype=float).reshape(-1, order="F"))
    X = x.reshape(n, n, order="F")
    return 0.5 * (X + X.T)
