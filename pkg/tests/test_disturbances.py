import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from safectl.disturbances import (
    Distribution,
    DisturbanceSpec,
    RandomizationSpec,
    SeedPlan,
    disturbance_draw,
    param_grid,
    sample_initial_state,
    sample_params,
)
from safectl.dynamics import CartPoleParams
from safectl.errors import DegenerateDistribution

seeds = st.integers(0, 2**31 - 1)


@given(seeds, st.integers(0, 100), st.integers(0, 10_000))
def test_draw_is_pure_function_of_coordinates(seed, episode, step):
    spec = DisturbanceSpec("action", "white_noise", std=[1.0])
    a = disturbance_draw(spec, 2, SeedPlan(seed), episode, step)
    # evaluating other steps first must not change the draw
    for k in range(3):
        disturbance_draw(spec, 2, SeedPlan(seed), episode, step + k + 1)
    b = disturbance_draw(spec, 2, SeedPlan(seed), episode, step)
    assert a.tobytes() == b.tobytes()


def test_streams_are_distinct():
    plan = SeedPlan(0)
    act = DisturbanceSpec("action", "white_noise", std=[1.0])
    obs = DisturbanceSpec("observation", "white_noise", std=[1.0])
    a = disturbance_draw(act, 3, plan, 0, 5)
    assert not np.array_equal(a, disturbance_draw(obs, 3, plan, 0, 5))
    assert not np.array_equal(a, disturbance_draw(act, 3, plan, 1, 5))
    assert not np.array_equal(a, disturbance_draw(act, 3, plan, 0, 6))
    assert not np.array_equal(a, disturbance_draw(act, 3, SeedPlan(1), 0, 5))


def test_white_noise_statistics():
    spec = DisturbanceSpec("action", "white_noise", std=[0.5])
    draws = np.array([disturbance_draw(spec, 1, SeedPlan(3), 0, k)[0] for k in range(4000)])
    assert abs(draws.mean()) < 0.05
    assert abs(draws.std() - 0.5) < 0.03
    # successive steps are uncorrelated
    assert abs(np.corrcoef(draws[:-1], draws[1:])[0, 1]) < 0.06


def test_step_and_impulse_profiles():
    step = DisturbanceSpec("dynamics", "step", magnitude=[2.0], step=3, channels=[1])
    imp = DisturbanceSpec("dynamics", "impulse", magnitude=[5.0], step=3)
    plan = SeedPlan(0)
    assert [disturbance_draw(step, 2, plan, 0, k)[1] for k in range(5)] == [0, 0, 0, 2.0, 2.0]
    assert [disturbance_draw(step, 2, plan, 0, k)[0] for k in range(5)] == [0] * 5
    assert [disturbance_draw(imp, 1, plan, 0, k)[0] for k in range(5)] == [0, 0, 0, 5.0, 0]


def test_initial_state_sampling():
    spec = RandomizationSpec(x0_dist={0: Distribution("uniform", -1.0, 1.0), 2: Distribution("gaussian", std=0.1)})
    x0 = np.array([0.0, 0.5, 0.0, 0.0])
    a = sample_initial_state(spec, x0, 4, 2)
    assert a.tobytes() == sample_initial_state(spec, x0, 4, 2).tobytes()
    assert -1 <= a[0] <= 1 and a[1] == 0.5 and a[3] == 0.0
    assert not np.array_equal(a, sample_initial_state(spec, x0, 4, 3))
    np.testing.assert_array_equal(sample_initial_state(RandomizationSpec(), x0, 4, 2), x0)


def test_parameter_sampling_and_pinning():
    nominal = CartPoleParams()
    spec = RandomizationSpec(param_dist={"m_c": Distribution("uniform", -0.1, 0.1)}, param_values={"l": 0.75})
    p = sample_params(spec, nominal, 1, 0)
    assert 0.9 <= p.m_c <= 1.1 and p.l == 0.75 and p.m_p == nominal.m_p
    with pytest.raises(ValueError):
        sample_params(RandomizationSpec(param_values={"bogus": 1.0}), nominal, 0, 0)


def test_degenerate_distribution_raises():
    spec = RandomizationSpec(param_dist={"l": Distribution("uniform", -10.0, -5.0)})
    with pytest.raises(DegenerateDistribution):
        sample_params(spec, CartPoleParams(), 0, 0, max_tries=5)


def test_param_grid():
    grid = param_grid(CartPoleParams(), "l", [0.5, 1.0, 1.5])
    assert [p.l for p in grid] == [0.25, 0.5, 0.75]


def test_spec_validation():
    with pytest.raises(ValueError):
        DisturbanceSpec("action", "white_noise", std=[-1.0])
    with pytest.raises(ValueError):
        Distribution("uniform", 1.0, 0.0)
    with pytest.raises(ValueError):
        RandomizationSpec(prior_scaling=0.0)
    assert Distribution.from_dict({"kind": "gaussian", "std": 0.2}).std == 0.2
