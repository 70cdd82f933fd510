import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from safectl.constraints import ConstraintSet, bound, quadratic
from safectl.controllers import LqrController
from safectl.dynamics import make_model
from safectl.envs import make_env, make_task
from safectl.safefilters import (
    CbfFilter,
    CbfSpec,
    GpModel,
    MpscConfig,
    MpscFilter,
    MpscSource,
    MpscState,
    TransitionBuffer,
    cbf_filter,
    coarse_task,
    constraint_margins,
    gp_fit,
    lie_derivatives,
    log_marginal_likelihood,
    mpsc_filter,
    residual_dataset,
)
from safectl.safefilters import mpsc as mpsc_module
from safectl.safefilters.gpmpc import GpMpcController

# --- GP regression ---------------------------------------------------------


def _sine_data(n=60, noise=0.01, seed=0):
    rng = np.random.default_rng(seed)
    Z = rng.uniform(-3, 3, (n, 1))
    y = np.sin(Z[:, 0]) + noise * rng.standard_normal(n)
    return Z, y


def test_gp_recovers_sine():
    Z, y = _sine_data()
    gp = gp_fit(Z, y)
    Zq = np.linspace(-2.5, 2.5, 50)[:, None]
    mean, var = gp.predict(Zq)
    assert np.sqrt(np.mean((mean[:, 0] - np.sin(Zq[:, 0])) ** 2)) < 0.02
    assert np.all(var >= 0)


def test_gp_variance_grows_away_from_data():
    Z, y = _sine_data()
    gp = gp_fit(Z, y)
    _, v_in = gp.predict([[0.0]])
    _, v_out = gp.predict([[12.0]])
    assert v_out[0, 0] > 100 * v_in[0, 0]


@given(arrays(float, 4, elements=st.floats(-2.0, 2.0)))
def test_lml_gradient_matches_finite_differences(theta):
    rng = np.random.default_rng(1)
    Z = rng.normal(size=(15, 2))
    y = np.sin(Z[:, 0]) + 0.1 * rng.standard_normal(15)
    lml, grad = log_marginal_likelihood(theta, Z, y)
    h = 1e-6
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        fd = (log_marginal_likelihood(theta + e, Z, y, False) - log_marginal_likelihood(theta - e, Z, y, False)) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-4, abs=1e-4)


def test_gp_mean_jacobian_matches_finite_differences():
    rng = np.random.default_rng(2)
    Z = rng.normal(size=(30, 3))
    Y = np.column_stack([np.sin(Z[:, 0]) * Z[:, 1], np.cos(Z[:, 2])]) + 0.05 * rng.standard_normal((30, 2))
    gp = gp_fit(Z, Y)
    z = np.array([0.1, -0.3, 0.4])
    mean, jac = gp.mean_jacobian(z)
    np.testing.assert_allclose(mean, gp.predict(z)[0][0], atol=1e-12)
    h = 1e-4
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (gp.predict(z + e)[0][0] - gp.predict(z - e)[0][0]) / (2 * h)
        np.testing.assert_allclose(jac[:, i], fd, rtol=1e-5, atol=1e-6)


def test_gp_fit_is_deterministic():
    Z, y = _sine_data(seed=4)
    a, b = gp_fit(Z, y, seed=3), gp_fit(Z, y, seed=3)
    assert a.predict([[0.7]])[0].tobytes() == b.predict([[0.7]])[0].tobytes()


def test_empty_gp_predicts_zero():
    gp = GpModel.empty(3, 2)
    mean, var = gp.predict(np.ones((4, 3)))
    assert gp.is_empty and not mean.any() and not var.any()


def test_transition_buffer_keeps_most_recent():
    buf = TransitionBuffer(capacity=3)
    for i in range(5):
        buf.add([i], [0.0], [i + 1])
    X, U, Xn = buf.arrays()
    assert len(buf) == 3 and buf.seen == 5
    np.testing.assert_array_equal(X[:, 0], [2, 3, 4])
    Z, Y = residual_dataset(lambda x, u: x + 1, X, U, Xn)
    assert Z.shape == (3, 2) and not Y.any()


# --- GP-MPC helpers ----------------------------------------------------------


def test_constraint_margins_scale_with_std():
    cset = ConstraintSet((bound("state", [0], lower=[-1.0], upper=[1.0]), bound("state", [1], upper=[2.0])), 2, 1)
    var = np.array([[0.04, 0.01], [0.09, 0.16]])
    m = constraint_margins(cset, var, 2.0)
    np.testing.assert_allclose(m, [[0.4, 0.2], [0.6, 0.8]])


def test_coarse_task_subsamples():
    m = make_model("quadrotor_1d")
    t = make_task(m, "tracking", L=10, trajectory={"shape": "sine"})
    c = coarse_task(t, 5)
    assert c.L == 2
    np.testing.assert_array_equal(c.x_ref, t.x_ref[[0, 5, 10]])


def test_gpmpc_rate_must_divide():
    with pytest.raises(ValueError):
        GpMpcController(control_hz=15).hold_steps(0.02)
    assert GpMpcController(control_hz=10).hold_steps(0.02) == 5


# --- CBF ---------------------------------------------------------------------

QUAD1D = make_model("quadrotor_1d")
SPEED = CbfSpec([1], [[1.0]], 0.04, gamma=4.0)  # |z_dot| <= 0.2


def test_lie_derivatives_closed_form():
    x = np.array([1.0, 0.1])
    lf, lg = lie_derivatives(SPEED, QUAD1D, x)
    g, m = QUAD1D.params.g, QUAD1D.params.m
    assert lf == pytest.approx(2 * g * 0.1)
    np.testing.assert_allclose(lg, [-0.2 / m])


@given(st.floats(-0.19, 0.19), st.floats(0.0, 0.6))
def test_cbf_matches_closed_form_projection(zdot, u_p):
    x = np.array([1.0, zdot])
    lf, lg = lie_derivatives(SPEED, QUAD1D, x)
    rhs = lf + SPEED.gamma * SPEED.h(x)
    u, modified = cbf_filter(SPEED, QUAD1D, [u_p], x)
    if lf + lg[0] * u_p + SPEED.gamma * SPEED.h(x) >= 0:
        assert not modified and u[0] == u_p
    else:
        assert modified
        assert u[0] == pytest.approx(rhs / -lg[0], rel=1e-5, abs=1e-7)
    assert lf + lg[0] * u[0] + SPEED.gamma * SPEED.h(x) >= -1e-6


def test_cbf_respects_input_bounds_with_slack():
    x = np.array([1.0, 0.19])
    lo, hi = QUAD1D.input_bounds()
    u, _ = cbf_filter(SPEED, QUAD1D, [hi[0]], x, (lo, hi))
    assert lo[0] <= u[0] <= hi[0]


def test_cbf_filter_keeps_cartpole_in_ellipse():
    m = make_model("cartpole")
    ell = quadratic("state", [2, 3], np.diag([1 / 0.15**2, 1.0]), 1.0)
    cset = ConstraintSet((ell,), 4, 1)
    env = make_env(m, make_task(m, L=150), x0=[0.8, 0.0, 0.0, 0.25], constraints=cset)
    hmin = {}
    for name, filt in (("raw", None), ("cbf", CbfFilter())):
        obs, info = env.reset(0)
        ctrl = LqrController()
        ctrl.reset(info)
        if filt:
            filt.reset(info)
        h = []
        done = False
        k = 0
        while not done:
            u = ctrl.act(obs, k)
            if filt:
                u = filt(obs, u, k)
            r = env.step(u)
            obs, done = r.obs, r.done
            h.append(-r.info["constraint_values"][0])
            k += 1
        hmin[name] = min(h)
    assert hmin["raw"] < 0
    assert hmin["cbf"] >= -1e-6


def test_cbf_spec_requires_quadratic_state_constraint():
    with pytest.raises(ValueError):
        CbfSpec.from_constraint(bound("state", [0], upper=[1.0]))
    with pytest.raises(ValueError):
        CbfSpec([0], [[1.0]], 1.0, gamma=0.0)


# --- MPSC --------------------------------------------------------------------

CART = make_model("cartpole")
CART_SET = ConstraintSet((bound("state", [2], lower=[-0.1], upper=[0.1]), bound("state", [0], lower=[-1.0], upper=[1.0])), 4, 1)


def _mpsc_cfg(**kw):
    return MpscConfig(CART, 0.02, CART_SET, input_bounds=CART.input_bounds(), **kw)


def test_mpsc_passes_safe_proposal_unchanged():
    cfg = _mpsc_cfg()
    state = MpscState()
    u, cert = mpsc_filter(cfg, [0.0], np.zeros(4), 0, state)
    assert cert and u[0] == 0.0 and state.source is MpscSource.PROPOSED


@given(st.floats(-8.0, 8.0), st.floats(-0.05, 0.05), st.floats(-0.2, 0.2))
def test_mpsc_is_idempotent(u_p, theta, thetadot):
    cfg = _mpsc_cfg()
    x = np.array([0.0, 0.0, theta, thetadot])
    u1, c1 = mpsc_filter(cfg, [u_p], x)
    if not c1:
        return
    u2, c2 = mpsc_filter(cfg, u1, x)
    assert c2
    np.testing.assert_allclose(u2, u1, rtol=0, atol=1e-9)


def test_mpsc_projects_unsafe_proposal():
    cfg = _mpsc_cfg()
    state = MpscState()
    x = np.array([0.0, 0.0, 0.06, 0.2])
    u, cert = mpsc_filter(cfg, [-10.0], x, 0, state)
    assert cert and state.source is MpscSource.PROJECTED and u[0] > -10.0
    # the projection is itself certified without further change
    u2, cert2 = mpsc_filter(cfg, u, x)
    assert cert2
    np.testing.assert_allclose(u2, u, rtol=0, atol=1e-9)


def test_mpsc_softens_before_falling_back():
    cfg = _mpsc_cfg()
    state = MpscState()
    u, cert = mpsc_filter(cfg, [0.0], np.array([5.0, 0.0, 0.0, 0.0]), 0, state)
    assert not cert and state.source is MpscSource.SLACK and np.all(np.isfinite(u))


def test_mpsc_falls_back_to_backup_plan(monkeypatch):
    cfg = _mpsc_cfg()
    state = MpscState()
    _, cert = mpsc_filter(cfg, [0.0], np.array([0.0, 0.0, 0.02, 0.0]), 0, state)
    assert cert
    plan = state.plan.copy()
    monkeypatch.setattr(mpsc_module, "_slack_solve", lambda *a: None)
    x = np.array([5.0, 0.0, 0.0, 0.0])
    u, cert = mpsc_filter(cfg, [0.0], x, 1, state)
    assert not cert and state.source is MpscSource.BACKUP
    expected = np.clip(cfg.u_eq - cfg.K @ (x - cfg.x_eq) + plan[1], *CART.input_bounds())
    np.testing.assert_array_equal(u, expected)


def test_mpsc_uncertified_without_backup():
    cfg = _mpsc_cfg(terminal_half_width=0.0)
    state = MpscState()
    _, cert = mpsc_filter(cfg, [0.0], np.array([5.0, 0.0, 0.0, 0.0]), 0, state)
    assert not cert and state.source in (MpscSource.SLACK, MpscSource.BACKUP)


def test_mpsc_filter_keeps_angle_bound_under_excitation():
    task = make_task(CART, L=60)
    env = make_env(CART, task, x0=np.zeros(4), constraints=CART_SET)

    class Shaky(LqrController):
        def act(self, obs, step):
            return super().act(obs, step) + 6.0 * np.sin(0.2 * step)

    results = {}
    for name, filt in (("raw", None), ("mpsc", MpscFilter(horizon=30, state_margin=1e-3))):
        obs, info = env.reset(0)
        ctrl = Shaky()
        ctrl.reset(info)
        if filt:
            filt.reset(info)
        worst = 0.0
        done = False
        k = 0
        while not done:
            u = ctrl.act(obs, k)
            if filt:
                u = filt(obs, u, k)
            r = env.step(u)
            obs, done = r.obs, r.done
            worst = max(worst, abs(r.info["true_state"][2]))
            k += 1
        results[name] = worst
    assert results["raw"] > 0.1
    assert results["mpsc"] <= 0.1 + 1e-6
