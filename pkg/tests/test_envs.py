import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from safectl.constraints import ConstraintSet, bound
from safectl.disturbances import DisturbanceSpec, RandomizationSpec
from safectl.dynamics import make_model
from safectl.envs import generate_trajectory, make_env, make_task, planar_point, quadratic_cost
from safectl.errors import DimensionMismatch, EpisodeOver, UnsupportedShape

INFO_KEYS = {
    "true_state", "constraint_values", "violation", "proposed_input", "disturbed_input", "applied_input",
    "action_disturbance", "dynamics_force", "terminated", "failure",
}


def _cartpole_env(**kw):
    m = make_model("cartpole")
    return make_env(m, make_task(m, L=kw.pop("L", 20)), **kw)


def test_reset_discloses_prior_and_task():
    m = make_model("quadrotor_1d")
    env = make_env(m, make_task(m, L=10), randomization=RandomizationSpec(prior_scaling=1.5))
    obs, info = env.reset(0)
    assert info.prior_model.params.m == pytest.approx(1.5 * m.params.m)
    assert info.true_model.params.m == m.params.m
    assert info.dt == pytest.approx(0.02) and env.substeps == 20
    np.testing.assert_array_equal(obs, info.x0)


def test_step_info_and_episode_length():
    env = _cartpole_env(x0=[0.0, 0.0, 0.01, 0.0])
    env.reset(0)
    steps = 0
    done = False
    while not done:
        r = env.step([0.0])
        assert INFO_KEYS <= set(r.info)
        done = r.done
        steps += 1
    assert steps == 20 and not r.info["terminated"]
    with pytest.raises(EpisodeOver):
        env.step([0.0])


def test_cartpole_terminates_past_angle_limit():
    env = _cartpole_env(x0=[0.0, 0.0, 0.2, 0.0], L=200)
    env.reset(0)
    for _ in range(200):
        r = env.step([0.0])
        if r.done:
            break
    assert r.info["terminated"] and abs(r.info["true_state"][2]) > 0.2094


def test_inputs_saturate_after_noise():
    env = _cartpole_env(disturbances=[DisturbanceSpec("action", "white_noise", std=[1.0])])
    env.reset(3)
    r = env.step([100.0])
    assert r.info["applied_input"][0] == 10.0
    np.testing.assert_allclose(r.info["disturbed_input"], 100.0 + r.info["action_disturbance"])


def test_constraint_values_reported():
    m = make_model("cartpole")
    cset = ConstraintSet((bound("state", [0], lower=[-0.01], upper=[0.01]),), 4, 1)
    env = make_env(m, make_task(m, L=50), x0=[0.0, 0.0, 0.0, 0.0], constraints=cset)
    env.reset(0)
    r = env.step([10.0])
    assert r.info["constraint_values"].shape == (2,)
    while not (r.done or r.info["violation"]):
        r = env.step([10.0])
    assert r.info["violation"] and r.info["constraint_values"][0] > 0


def test_reset_is_deterministic_and_seeded():
    spec = DisturbanceSpec("observation", "white_noise", std=[0.01])
    env = _cartpole_env(disturbances=[spec])
    traj = []
    for _ in range(2):
        obs, _ = env.reset(7, 1)
        seq = [obs]
        for k in range(5):
            seq.append(env.step([0.1]).obs)
        traj.append(np.array(seq))
    assert traj[0].tobytes() == traj[1].tobytes()
    obs_other, _ = env.reset(8, 1)
    assert not np.array_equal(obs_other, traj[0][0])


def test_rewards_sum_to_negative_quadratic_cost():
    env = _cartpole_env(x0=[0.1, 0.0, 0.05, 0.0])
    obs, info = env.reset(0)
    X, U, rewards = [info.x0], [], []
    done = False
    while not done:
        u = np.array([-0.5 * obs[0]])
        r = env.step(u)
        X.append(r.info["true_state"])
        U.append(r.info["applied_input"])
        rewards.append(r.reward)
        obs, done = r.obs, r.done
    assert -sum(rewards) == pytest.approx(quadratic_cost(info.task, np.array(X), np.array(U)), rel=1e-12)


def test_sparse_reward():
    m = make_model("cartpole")
    env = make_env(m, make_task(m, L=3, reward="sparse"), x0=[0.0, 0.0, 0.01, 0.0])
    env.reset(0)
    assert env.step([0.0]).reward == 1.0


def test_physics_rate_must_divide():
    m = make_model("cartpole")
    with pytest.raises(ValueError):
        make_env(m, make_task(m), physics_hz=1000, control_hz=30)


def test_task_reference_shapes():
    m = make_model("quadrotor_2d")
    t = make_task(m, "tracking", L=100, trajectory={"shape": "circle", "scale": 0.5, "period": 2.0})
    assert t.x_ref.shape == (101, 6) and t.u_ref.shape == (100, 2)
    radius = np.hypot(t.x_ref[:, 0], t.x_ref[:, 2] - 1.0)
    np.testing.assert_allclose(radius, 0.5, atol=1e-12)
    np.testing.assert_allclose(t.u_ref, np.tile(m.equilibrium_input(), (100, 1)))
    with pytest.raises(DimensionMismatch):
        make_task(m, Q=np.eye(3))


@pytest.mark.parametrize("shape", ["circle", "sine", "lemniscate", "square"])
@given(st.floats(0.0, 10.0))
def test_trajectories_are_periodic_with_consistent_velocity(shape, t):
    period = 4.0
    a = planar_point(shape, t, 1.0, period)
    b = planar_point(shape, t + period, 1.0, period)
    np.testing.assert_allclose(a, b, atol=1e-9)
    if shape != "square":
        h = 1e-6
        p0 = planar_point(shape, t - h, 1.0, period)
        p1 = planar_point(shape, t + h, 1.0, period)
        np.testing.assert_allclose((np.array(p1[:2]) - p0[:2]) / (2 * h), a[2:], atol=1e-5)


def test_unknown_shape_raises():
    with pytest.raises(UnsupportedShape):
        generate_trajectory("spiral", 1.0, 1.0, 10, 0.02, make_model("quadrotor_2d"))
