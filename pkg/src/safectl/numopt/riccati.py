"""Continuous and discrete algebraic Riccati equation solvers.

CARE: Kleinman-Newton iteration from a stabilizing initial gain.
DARE: structure-preserving doubling (an accelerated fixed-point iteration)
followed by Hewer refinement steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonStabilizable
from .linalg import solve_lyapunov, solve_stein

RICCATI_TOL = 1e-9


@dataclass(frozen=True)
class RiccatiSolution:
    P: np.ndarray
    K: np.ndarray
    residual_norm: float


def _as2d(M, cols=None):
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1:
        M = M.reshape(-1, 1) if cols == 1 else M.reshape(1, -1)
    return M


def _check(A, B, Q, R):
    A = _as2d(A)
    B = _as2d(B, cols=1)
    Q = _as2d(Q)
    R = _as2d(R)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or Q.shape != (n, n):
        raise ValueError("inconsistent Riccati dimensions")
    k = B.shape[1]
    if R.shape != (k, k):
        raise ValueError("R must be k x k")
    return A, B, Q, R


def care_residual(A, B, Q, R, P) -> float:
    """Frobenius norm of ``A^T P + P A - P B R^-1 B^T P + Q``."""
    A, B, Q, R = _check(A, B, Q, R)
    res = A.T @ P + P @ A - P @ B @ np.linalg.solve(R, B.T @ P) + Q
    return float(np.linalg.norm(res, "fro"))


def dare_residual(A, B, Q, R, P) -> float:
    """Frobenius norm of ``A^T P A - P - A^T P B (R + B^T P B)^-1 B^T P A + Q``."""
    A, B, Q, R = _check(A, B, Q, R)
    BtPA = B.T @ P @ A
    res = A.T @ P @ A - P - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA) + Q
    return float(np.linalg.norm(res, "fro"))


def _hurwitz(M) -> bool:
    return bool(np.all(np.linalg.eigvals(M).real < 0.0))


def _schur_stable(M) -> bool:
    return bool(np.all(np.abs(np.linalg.eigvals(M)) < 1.0))


def _initial_gain(A, B, R):
    """Stabilizing gain for the Newton iteration.

    Zero if ``A`` is already Hurwitz. Otherwise Bass' construction: for a shift
    ``beta`` exceeding the spectral abscissa of ``-A``, solve
    ``(A + beta I) Z + Z (A + beta I)^T = 2 B B^T`` and take ``K = B^T Z^-1``.
    The shift is bracketed by bisection between the pole radius of ``A`` and a
    doubling upper bound, keeping the smallest shift that stabilizes.
    """
    n = A.shape[0]
    if _hurwitz(A):
        return np.zeros((B.shape[1], n))
    radius = float(np.max(np.abs(np.linalg.eigvals(A)))) + 1.0
    ident = np.eye(n)

    def gain(beta):
        As = A + beta * ident
        # solve_lyapunov solves X^T form: As Z + Z As^T - 2BB^T = 0
        Z = solve_lyapunov(As.T, -2.0 * B @ B.T)
        try:
            return B.T @ np.linalg.pinv(Z, rcond=1e-13)
        except np.linalg.LinAlgError:
            return None

    hi = radius
    K_hi = None
    for _ in range(30):
        K_hi = gain(hi)
        if K_hi is not None and np.all(np.isfinite(K_hi)) and _hurwitz(A - B @ K_hi):
            break
        hi *= 2.0
    else:
        raise NonStabilizable("no stabilizing initial gain found")
    lo = 0.5 * radius
    for _ in range(20):
        mid = 0.5 * (lo + hi)
        K_mid = gain(mid)
        if K_mid is not None and np.all(np.isfinite(K_mid)) and _hurwitz(A - B @ K_mid):
            hi, K_hi = mid, K_mid
        else:
            lo = mid
        if hi - lo < 1e-3 * radius:
            break
    return K_hi


def solve_care(A, B, Q, R, tol: float = RICCATI_TOL, max_iter: int = 100) -> RiccatiSolution:
    A, B, Q, R = _check(A, B, Q, R)
    K = _initial_gain(A, B, R)
    P = None
    for _ in range(max_iter):
        Acl = A - B @ K
        P_new = solve_lyapunov(Acl, Q + K.T @ R @ K)
        if not np.all(np.isfinite(P_new)):
            raise NonStabilizable("Newton iteration diverged")
        K = np.linalg.solve(R, B.T @ P_new)
        converged = P is not None and np.linalg.norm(P_new - P) <= 1e-14 * max(1.0, np.linalg.norm(P_new))
        P = P_new
        if converged or care_residual(A, B, Q, R, P) <= 0.01 * tol:
            break
    res = care_residual(A, B, Q, R, P)
    if not _hurwitz(A - B @ K):
        raise NonStabilizable("closed loop A - BK is not Hurwitz")
    if res > tol * max(1.0, np.linalg.norm(P)):
        raise NonStabilizable(f"CARE residual {res:.3e} above tolerance")
    return RiccatiSolution(P=P, K=K, residual_norm=res)


def dare_gain(A, B, R, P) -> np.ndarray:
    A, B, R = _as2d(A), _as2d(B, cols=1), _as2d(R)
    return np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)


def solve_dare(Ad, Bd, Q, R, tol: float = RICCATI_TOL, max_iter: int = 60) -> RiccatiSolution:
    A, B, Q, R = _check(Ad, Bd, Q, R)
    n = A.shape[0]
    ident = np.eye(n)
    Ak = A.copy()
    Gk = B @ np.linalg.solve(R, B.T)
    Hk = Q.copy()
    scale = max(1.0, np.linalg.norm(Q))
    for _ in range(max_iter):
        W = np.linalg.solve(ident + Gk @ Hk, np.hstack([Ak, Gk]))
        WA, WG = W[:, :n], W[:, n:]
        H_next = Hk + Ak.T @ Hk @ WA
        G_next = Gk + Ak @ WG @ Ak.T
        A_next = Ak @ WA
        H_next = 0.5 * (H_next + H_next.T)
        if not np.all(np.isfinite(H_next)) or np.linalg.norm(H_next) > 1e12 * scale:
            raise NonStabilizable("doubling iteration diverged")
        delta = np.linalg.norm(H_next - Hk)
        Ak, Gk, Hk = A_next, 0.5 * (G_next + G_next.T), H_next
        if delta <= 1e-15 * max(1.0, np.linalg.norm(Hk)):
            break
    P = Hk
    K = dare_gain(A, B, R, P)
    if not _schur_stable(A - B @ K):
        raise NonStabilizable("closed loop A - BK is not Schur stable")
    # Hewer refinement polishes the doubling result to machine precision.
    for _ in range(3):
        if dare_residual(A, B, Q, R, P) <= 1e-3 * tol:
            break
        Acl = A - B @ K
        P = solve_stein(Acl, Q + K.T @ R @ K)
        K = dare_gain(A, B, R, P)
    res = dare_residual(A, B, Q, R, P)
    if res > tol * max(1.0, np.linalg.norm(P)):
        raise NonStabilizable(f"DARE residual {res:.3e} above tolerance")
    return RiccatiSolution(P=P, K=K, residual_norm=res)
