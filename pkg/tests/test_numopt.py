import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from safectl.errors import NonStabilizable, NotPD
from safectl.numopt import (
    QpProblem,
    QpStatus,
    care_residual,
    chol_factor,
    chol_solve,
    dare_residual,
    expm,
    solve_care,
    solve_dare,
    solve_lyapunov,
    solve_qp,
    solve_stein,
    zoh_discretize,
)
from safectl.numopt.qp import residuals

finite = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)


# --- matrix exponential and ZOH -------------------------------------------

@given(arrays(float, (4, 4), elements=finite))
def test_expm_matches_scipy(M):
    np.testing.assert_allclose(expm(M), sla.expm(M), rtol=1e-10, atol=1e-10)


def test_expm_large_norm_uses_squaring():
    M = np.array([[0.0, 40.0], [-40.0, 0.0]])  # rotation by 40 rad
    E = expm(M)
    c, s = np.cos(40.0), np.sin(40.0)
    np.testing.assert_allclose(E, [[c, s], [-s, c]], atol=1e-10)


def test_zoh_double_integrator_closed_form():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    dt = 0.1
    Ad, Bd = zoh_discretize(A, B, dt)
    np.testing.assert_allclose(Ad, [[1.0, dt], [0.0, 1.0]], atol=1e-15)
    np.testing.assert_allclose(Bd, [[dt * dt / 2], [dt]], atol=1e-15)


def test_zoh_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        zoh_discretize(np.eye(2), np.ones((2, 1)), 0.0)


# --- Cholesky with jitter --------------------------------------------------

def test_chol_solve_spd():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(5, 5))
    S = M @ M.T + 5 * np.eye(5)
    y = rng.normal(size=5)
    np.testing.assert_allclose(chol_solve(S, y), np.linalg.solve(S, y), rtol=1e-10)


def test_chol_jitter_rescues_semidefinite():
    S = np.ones((3, 3))  # rank one
    (c, _), jitter = chol_factor(S)
    assert jitter > 0
    assert np.all(np.isfinite(c))


def test_chol_indefinite_raises():
    with pytest.raises(NotPD):
        chol_factor(np.diag([1.0, -1.0]))


# --- Lyapunov / Stein -----------------------------------------------------

def test_lyapunov_and_stein_residuals():
    A = np.array([[-1.0, 2.0], [0.0, -3.0]])
    Q = np.eye(2)
    X = solve_lyapunov(A, Q)
    np.testing.assert_allclose(A.T @ X + X @ A + Q, 0.0, atol=1e-12)
    Ad = np.array([[0.5, 0.2], [0.0, 0.3]])
    Y = solve_stein(Ad, Q)
    np.testing.assert_allclose(Ad.T @ Y @ Ad - Y + Q, 0.0, atol=1e-12)


# --- Riccati ---------------------------------------------------------------

def test_care_unit_double_integrator():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    sol = solve_care(A, B, np.eye(2), np.eye(1))
    np.testing.assert_allclose(sol.K, [[1.0, np.sqrt(3.0)]], atol=1e-10)
    assert sol.residual_norm <= 1e-9


@pytest.mark.parametrize("m", [0.027, 0.5, 2.0])
def test_care_mass_scaled_double_integrator(m):
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0 / m]])
    sol = solve_care(A, B, np.eye(2), np.eye(1))
    np.testing.assert_allclose(sol.K, [[1.0, np.sqrt(1.0 + 2.0 * m)]], rtol=1e-10)


def _stabilizable_pair(seed, n=4, k=2):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, k))
    return A, B


@given(st.integers(0, 10_000))
def test_care_matches_scipy(seed):
    A, B = _stabilizable_pair(seed)
    Q, R = np.eye(4), np.eye(2)
    sol = solve_care(A, B, Q, R)
    ref = sla.solve_continuous_are(A, B, Q, R)
    np.testing.assert_allclose(sol.P, ref, rtol=1e-7, atol=1e-8)
    assert care_residual(A, B, Q, R, sol.P) <= 1e-9 * max(1.0, np.linalg.norm(sol.P))
    assert np.all(np.linalg.eigvals(A - B @ sol.K).real < 0)


@given(st.integers(0, 10_000))
def test_dare_matches_scipy(seed):
    A, B = _stabilizable_pair(seed)
    A = A / max(1.0, np.max(np.abs(np.linalg.eigvals(A)))) * 1.2
    Q, R = np.eye(4), np.eye(2)
    sol = solve_dare(A, B, Q, R)
    ref = sla.solve_discrete_are(A, B, Q, R)
    np.testing.assert_allclose(sol.P, ref, rtol=1e-7, atol=1e-8)
    assert dare_residual(A, B, Q, R, sol.P) <= 1e-9 * max(1.0, np.linalg.norm(sol.P))
    assert np.max(np.abs(np.linalg.eigvals(A - B @ sol.K))) < 1


def test_riccati_uncontrollable_unstable_mode_raises():
    A = np.diag([1.0, -1.0])
    B = np.array([[0.0], [1.0]])
    with pytest.raises(NonStabilizable):
        solve_care(A, B, np.eye(2), np.eye(1))
    with pytest.raises(NonStabilizable):
        solve_dare(np.diag([1.5, 0.5]), B, np.eye(2), np.eye(1))


# --- QP --------------------------------------------------------------------

def _objective(prob, z):
    return 0.5 * z @ prob.H @ z + prob.g @ z


@given(
    arrays(float, 5, elements=st.floats(0.1, 10.0)),
    arrays(float, 5, elements=finite),
    arrays(float, 5, elements=st.floats(-2.0, 0.0)),
    arrays(float, 5, elements=st.floats(0.0, 2.0)),
)
def test_qp_diagonal_box_closed_form(h, g, lo, hi):
    prob = QpProblem(np.diag(h), g, np.eye(5), lo, hi)
    sol = solve_qp(prob, eps_abs=1e-9, eps_rel=1e-9)
    assert sol.status is QpStatus.SOLVED
    np.testing.assert_allclose(sol.z_star, np.clip(-g / h, lo, hi), atol=1e-6)


def test_qp_equality_constrained_matches_kkt():
    rng = np.random.default_rng(3)
    M = rng.normal(size=(6, 6))
    H = M @ M.T + np.eye(6)
    g = rng.normal(size=6)
    A = rng.normal(size=(2, 6))
    b = rng.normal(size=2)
    kkt = np.block([[H, A.T], [A, np.zeros((2, 2))]])
    z_ref = np.linalg.solve(kkt, np.concatenate([-g, b]))[:6]
    sol = solve_qp(QpProblem(H, g, A, b, b), eps_abs=1e-9, eps_rel=1e-9)
    assert sol.solved
    np.testing.assert_allclose(sol.z_star, z_ref, atol=1e-6)


@given(st.integers(0, 10_000))
def test_qp_random_feasible_kkt(seed):
    rng = np.random.default_rng(seed)
    n, m = 6, 8
    M = rng.normal(size=(n, n))
    H = M @ M.T + 0.1 * np.eye(n)
    g = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    z_feas = rng.normal(size=n)
    lb = A @ z_feas - rng.uniform(0.0, 1.0, m)
    ub = A @ z_feas + rng.uniform(0.0, 1.0, m)
    prob = QpProblem(H, g, A, lb, ub)
    sol = solve_qp(prob)
    assert sol.solved
    rp, rd = residuals(prob, sol.z_star, sol.dual)
    assert rp <= 1e-5 and rd <= 1e-5
    # no feasible point does better (sampled around the solution)
    for _ in range(20):
        z = sol.z_star + 1e-2 * rng.normal(size=n)
        Az = A @ z
        if np.all(Az >= lb) and np.all(Az <= ub):
            assert _objective(prob, z) >= _objective(prob, sol.z_star) - 1e-6


def test_qp_infeasible_detected():
    A = np.array([[1.0], [1.0]])
    prob = QpProblem(np.eye(1), np.zeros(1), A, [1.0, -np.inf], [np.inf, -1.0])
    assert solve_qp(prob).status is QpStatus.INFEASIBLE


def test_qp_max_iter_reported():
    rng = np.random.default_rng(1)
    M = rng.normal(size=(10, 10))
    prob = QpProblem(M @ M.T + 1e-3 * np.eye(10), rng.normal(size=10), rng.normal(size=(15, 10)), -np.ones(15), np.ones(15))
    sol = solve_qp(prob, max_iter=1, polish=False, eps_abs=1e-12, eps_rel=1e-12)
    assert sol.status is QpStatus.MAX_ITER


def test_qp_warm_start_cuts_iterations():
    rng = np.random.default_rng(7)
    M = rng.normal(size=(8, 8))
    prob = QpProblem(M @ M.T + np.eye(8), rng.normal(size=8), np.eye(8), -0.3 * np.ones(8), 0.3 * np.ones(8))
    cold = solve_qp(prob, polish=False)
    warm = solve_qp(prob, warm_start=cold.z_star, warm_dual=cold.dual, polish=False)
    assert warm.iterations <= cold.iterations


def test_qp_is_deterministic():
    rng = np.random.default_rng(11)
    M = rng.normal(size=(5, 5))
    prob = QpProblem(M @ M.T + np.eye(5), rng.normal(size=5), rng.normal(size=(4, 5)), -np.ones(4), np.ones(4))
    a, b = solve_qp(prob), solve_qp(prob)
    assert a.z_star.tobytes() == b.z_star.tobytes()


def test_qp_problem_validation():
    with pytest.raises(ValueError):
        QpProblem(np.eye(2), np.zeros(3), np.zeros((0, 3)), [], [])
    with pytest.raises(ValueError):
        QpProblem(np.eye(1), np.zeros(1), np.eye(1), [1.0], [0.0])
