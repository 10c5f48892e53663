import math

import numpy as np
import pytest

from impact_game.errors import Assumption32Violated, LengthMismatch, NonPositive, TimeOutOfRange, ValidationError
from impact_game.market import (
    EnvParams,
    MarketParams,
    MarketState,
    TraderSpec,
    decay_kernel,
    initial_state,
    step_state,
    validate,
)

PAIR = (TraderSpec(1e5), TraderSpec(1e5))


def test_benchmark_is_admissible():
    params, env = MarketParams(T=10), EnvParams(T=10)
    validate(params, env, PAIR)
    assert params.impact_sum(1) == pytest.approx(0.5 * math.exp(-0.1) + 0.5)
    assert params.impact_sum(1) < 1


@pytest.mark.parametrize("alpha,beta,rho", [(1.0, 1.0, 0.0), (1.0, 0.0, 0.0)])
def test_friction_condition_violations(alpha, beta, rho):
    params = MarketParams(T=3, alpha=alpha, beta=beta, rho=rho)
    with pytest.raises(Assumption32Violated) as info:
        validate(params, EnvParams(T=3), PAIR)
    assert info.value.t == 1
    assert "Assumption 3.2" in str(info.value)


def test_friction_violation_reports_first_bad_period():
    params = MarketParams(T=3, alpha=[0.5, 1.0, 0.5], beta=[0.5, 0.5, 0.5])
    with pytest.raises(Assumption32Violated) as info:
        validate(params, EnvParams(T=3), PAIR)
    assert info.value.t == 2


def test_validation_errors():
    env = EnvParams(T=3)
    with pytest.raises(LengthMismatch):
        validate(MarketParams(T=3, lam=[0.001, 0.001]), env, PAIR)
    with pytest.raises(LengthMismatch):
        validate(MarketParams(T=3), EnvParams(T=4), PAIR)
    with pytest.raises(NonPositive):
        validate(MarketParams(T=3, lam=0.0), env, PAIR)
    with pytest.raises(NonPositive):
        validate(MarketParams(T=3), env, (TraderSpec(1e5, 0.0), TraderSpec(1e5)))
    with pytest.raises(NonPositive):
        validate(MarketParams(T=3), EnvParams(T=3, sigma=-1.0), PAIR)
    with pytest.raises(NonPositive):
        validate(MarketParams(T=3), EnvParams(T=3, rho_env_eps=1.0), PAIR)
    with pytest.raises(ValidationError):
        validate(MarketParams(T=3), EnvParams(T=3, mu_eps=0.1), PAIR)
    with pytest.raises(NonPositive):
        MarketParams(T=0)
    # validation errors are also ValueErrors
    assert issubclass(Assumption32Violated, ValueError)


def test_per_period_broadcast():
    p = MarketParams(T=4, lam=0.002)
    assert p.lam == (0.002,) * 4
    e = EnvParams(T=3, a=[0.1, 0.2, 0.3])
    assert e.a == (0.1, 0.2, 0.3)


def test_decay_kernel_values():
    assert decay_kernel(0, 0.7) == 1.0
    assert decay_kernel(1, 0.1) == pytest.approx(0.9048374, abs=1e-7)
    assert np.all(decay_kernel(np.arange(5), 0.0) == 1.0)
    with pytest.raises(ValueError):
        decay_kernel(-1, 0.1)


def test_residual_update():
    params, env = MarketParams(T=10), EnvParams(T=10)
    st = initial_state(PAIR, 100.0)
    nxt = step_state(st, (1e5, 1e5), (0.0, 0.0), params, env)
    assert nxt.residual == pytest.approx(90.48374, abs=1e-5)


def test_no_trade_step():
    params, env = MarketParams(T=10), EnvParams(T=10)
    st = MarketState(wealth=(5.0, -3.0), price=101.0, remaining=(7.0, 9.0), residual=12.0, env_prev=0.0, time=3)
    nxt = step_state(st, (0.0, 0.0), (0.0, 0.0), params, env)
    assert nxt.price == pytest.approx(101.0 - (1 - math.exp(-0.1)) * 12.0)
    assert nxt.wealth == st.wealth
    assert nxt.remaining == st.remaining
    assert nxt.time == 4


def test_wealth_update():
    params, env = MarketParams(T=10), EnvParams(T=10)
    st = initial_state(PAIR, 100.0)
    nxt = step_state(st, (1e5, 1e5), (0.0, 0.0), params, env)
    assert nxt.wealth[0] == pytest.approx(-3.0e7)
    assert nxt.wealth[1] == pytest.approx(-3.0e7)
    assert nxt.remaining == (0.0, 0.0)


def test_environment_and_price_recursion():
    params = MarketParams(T=5)
    env = EnvParams(T=5, a=0.3, b=-1.0, sigma=2.0)
    st = MarketState(wealth=(0.0, 0.0), price=100.0, remaining=(1.0, 1.0), residual=4.0, env_prev=0.5, time=2)
    q, omega, eps = (10.0, -4.0), 0.7, -0.2
    nxt = step_state(st, q, (omega, eps), params, env)
    env_now = 0.3 + 1.0 * 0.5 + 2.0 * omega
    assert nxt.env_prev == pytest.approx(env_now)
    d = math.exp(-0.1)
    expected = 100.0 - (1 - d) * 4.0 + (0.5 * d + 0.5) * 0.001 * 6.0 + env_now + eps
    assert nxt.price == pytest.approx(expected)
    assert nxt.residual == pytest.approx(d * (4.0 + 0.5 * 0.001 * 6.0))


def test_step_state_is_elementwise():
    params, env = MarketParams(T=3), EnvParams(T=3)
    n = 4
    st = MarketState(wealth=(np.zeros(n), np.zeros(n)), price=np.full(n, 100.0), remaining=(np.ones(n), np.ones(n)))
    q = (np.arange(n, dtype=float), -np.arange(n, dtype=float))
    nxt = step_state(st, q, (np.zeros(n), np.zeros(n)), params, env)
    for k in range(n):
        single = step_state(
            MarketState(wealth=(0.0, 0.0), price=100.0, remaining=(1.0, 1.0)), (float(k), -float(k)), (0.0, 0.0), params, env
        )
        assert nxt.wealth[0][k] == single.wealth[0]
        assert nxt.price[k] == single.price


def test_step_state_time_range():
    params, env = MarketParams(T=2), EnvParams(T=2)
    st = MarketState(wealth=(0.0, 0.0), price=1.0, remaining=(0.0, 0.0), time=3)
    with pytest.raises(TimeOutOfRange):
        step_state(st, (0.0, 0.0), (0.0, 0.0), params, env)


def test_swapped_state():
    st = MarketState(wealth=(1.0, 2.0), price=3.0, remaining=(4.0, 5.0), residual=6.0, env_prev=7.0, time=2)
    sw = st.swapped()
    assert sw.wealth == (2.0, 1.0) and sw.remaining == (5.0, 4.0)
    assert sw.swapped() == st


def test_shock_covariance():
    env = EnvParams(T=2, sigma=[1.0, 2.0], sigma_eps=[0.5, 0.1], rho_env_eps=0.4)
    cov = env.shock_cov(2)
    np.testing.assert_allclose(cov, [[4.0, 0.4 * 2 * 0.1], [0.4 * 2 * 0.1, 0.01]])
    assert env.env_mean(1, 2.0) == 0.0
