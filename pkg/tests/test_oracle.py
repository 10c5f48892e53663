import math

import numpy as np
import pytest

from impact_game.errors import BracketFailure, IntegrandOverflow
from impact_game.market import EnvParams, MarketParams, MarketState, TraderSpec, step_state
from impact_game.oracle import (
    QuadratureRule,
    fixed_point_equilibrium,
    numeric_best_response,
    oracle_value_coefficients,
    quadrature_continuation,
)
from impact_game.solver import ValueCoefficients, policy_action, solve_equilibrium, stage_objective
from impact_game.verification import random_state, rel_err


def _closed_br(sol, t, st, i, qj):
    S = sol.stage[t - 1][i]
    own, other = st.remaining[i], st.remaining[1 - i]
    return (S.B * own + S.C * other + S.D * st.residual + S.F * st.env_prev + S.M + S.N * qj) / (2 * S.A)


def test_rule_moments():
    rule = QuadratureRule(64)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert rule.integrate(lambda x: np.ones(len(x))) == pytest.approx(1.0, abs=1e-12)
    assert rule.integrate(lambda x: x[:, 0] ** 2) == pytest.approx(1.0, abs=1e-12)
    assert rule.integrate(lambda x: x[:, 0] ** 4 * x[:, 1] ** 2) == pytest.approx(3.0, abs=1e-10)


def test_deterministic_continuation_is_direct_evaluation():
    T = 4
    params, env = MarketParams(T=T), EnvParams(T=T, a=0.2, b=0.5, sigma=0.0, sigma_eps=0.0)
    traders = (TraderSpec(1e5), TraderSpec(-3e4))
    sol = solve_equilibrium(params, env, traders)
    st = MarketState(wealth=(1e3, -2e3), price=99.0, remaining=(6e4, -1e4), residual=5.0, env_prev=0.3, time=T - 1)
    q = (2e4, -5e3)
    num = quadrature_continuation(sol.value[T - 1], T - 1, st, *q, params, env, traders)
    nxt = step_state(st, q, (0.0, 0.0), params, env)
    for i in range(2):
        j = 1 - i
        direct = sol.value[T - 1][i].certainty_equivalent(
            nxt.wealth[i], nxt.price, nxt.remaining[i], nxt.remaining[j], nxt.residual, nxt.env_prev
        )
        assert num[i] == pytest.approx(direct, rel=1e-12)


def test_continuation_matches_closed_form(bench, bench_solution):
    params, env, traders = bench
    rng = np.random.default_rng(21)
    t = params.T - 1
    for _ in range(20):
        st = random_state(rng, t)
        q = rng.uniform(-2e5, 2e5, 2)
        num = quadrature_continuation(bench_solution.value[t], t, st, q[0], q[1], params, env, traders)
        for i in range(2):
            ref = stage_objective(bench_solution, t, st, i + 1, q[i], q[1 - i])
            assert num[i] == pytest.approx(ref, rel=1e-8)


def test_continuation_order_convergence(bench, bench_solution):
    params, env, traders = bench
    rng = np.random.default_rng(22)
    for t in (3, 9):
        st = random_state(rng, t)
        q = rng.uniform(-1e5, 1e5, 2)
        lo = quadrature_continuation(bench_solution.value[t], t, st, *q, params, env, traders, order=32)
        hi = quadrature_continuation(bench_solution.value[t], t, st, *q, params, env, traders, order=64)
        np.testing.assert_allclose(lo, hi, rtol=1e-10)


def test_terminal_continuation(bench):
    params, env, traders = bench
    st = MarketState(wealth=(0.0, 0.0), price=100.0, remaining=(10.0, -4.0), time=10)
    out = quadrature_continuation(None, 10, st, 10.0, -3.0, params, env, traders)
    assert out[0] == pytest.approx(-(100.0 + 0.001 * 7.0) * 10.0)
    assert out[1] == -math.inf


def test_best_response_matches_closed_form(bench, bench_solution):
    params, env, traders = bench
    rng = np.random.default_rng(23)
    t = params.T - 1
    for k in range(20):
        st = random_state(rng, t)
        qj = float(rng.uniform(-1e5, 1e5))
        i = k % 2
        closed = _closed_br(bench_solution, t, st, i, qj)
        num = numeric_best_response(bench_solution.value[t], t, st, i, qj, params, env, traders, center=closed)
        assert rel_err(num, closed) < 1e-4


def test_deterministic_best_response_is_the_vertex():
    T = 3
    params, env = MarketParams(T=T), EnvParams(T=T, sigma=0.0, sigma_eps=0.0)
    traders = (TraderSpec(1e5), TraderSpec(5e4))
    sol = solve_equilibrium(params, env, traders)
    st = MarketState(wealth=(0.0, 0.0), price=100.0, remaining=(8e4, 3e4), residual=2.0, env_prev=0.0, time=2)
    closed = _closed_br(sol, 2, st, 0, 1e4)
    num = numeric_best_response(sol.value[2], 2, st, 0, 1e4, params, env, traders)
    assert rel_err(num, closed) < 1e-8


def test_best_response_zero_when_linear_term_vanishes(bench, bench_solution):
    params, env, traders = bench
    st = MarketState(wealth=(0.0, 0.0), price=100.0, remaining=(0.0, 0.0), time=9)
    num = numeric_best_response(bench_solution.value[9], 9, st, 0, 0.0, params, env, traders)
    assert abs(num) < 1e-6


def test_fixed_point_at_symmetric_state(bench, bench_solution):
    params, env, traders = bench
    st = MarketState(wealth=(0.0, 0.0), price=100.0, remaining=(6e4, 6e4), residual=10.0, env_prev=0.2, time=9)
    q = fixed_point_equilibrium(bench_solution.value[9], 9, st, params, env, traders)
    ref = policy_action(bench_solution, 9, st)
    assert q[0] == pytest.approx(q[1], rel=1e-8)
    assert rel_err(q[0], ref[0]) < 1e-4


def test_two_period_game(rng):
    params, env = MarketParams(T=2), EnvParams(T=2, a=0.1, b=0.3, sigma=0.5)
    traders = (TraderSpec(1e5, 0.002), TraderSpec(-5e4))
    sol = solve_equilibrium(params, env, traders)
    for _ in range(5):
        st = random_state(rng, 1)
        q = fixed_point_equilibrium(sol.value[1], 1, st, params, env, traders)
        ref = policy_action(sol, 1, st)
        assert max(rel_err(x, y) for x, y in zip(q, ref)) < 1e-4


def test_policy_row_from_fixed_points(bench):
    # finite differences of oracle equilibria recover the affine policy at T - 1
    params, env, traders = bench
    env = EnvParams(T=10, a=0.2, b=0.4, sigma=1.0)
    sol = solve_equilibrium(params, env, traders)
    t = 9

    def q_at(own, other, residual, env_prev):
        st = MarketState(wealth=(0.0, 0.0), price=100.0, remaining=(own, other), residual=residual, env_prev=env_prev, time=t)
        return fixed_point_equilibrium(sol.value[t], t, st, params, env, traders)[0]

    base = q_at(0.0, 0.0, 0.0, 0.0)
    row = (
        base,
        (q_at(1e5, 0.0, 0.0, 0.0) - base) / 1e5,
        (q_at(0.0, 1e5, 0.0, 0.0) - base) / 1e5,
        (q_at(0.0, 0.0, 100.0, 0.0) - base) / 100.0,
        (q_at(0.0, 0.0, 0.0, 10.0) - base) / 10.0,
    )
    want = sol.policy[t - 1][0].as_tuple()
    for got, ref in zip(row, want):
        assert abs(got - ref) <= 1e-6 * abs(ref) + 1e-9


def test_oracle_value_coefficients_match_solver():
    params, env = MarketParams(T=3), EnvParams(T=3, a=0.1, b=0.2, sigma=0.5)
    traders = (TraderSpec(1e5), TraderSpec(-2e4, 0.002))
    sol = solve_equilibrium(params, env, traders)
    got = oracle_value_coefficients(sol.value[2], 2, params, env, traders)
    for i in range(2):
        a = np.array(got[i].as_tuple())
        b = np.array(sol.value[1][i].as_tuple())
        assert np.all(np.abs(a - b) <= 1e-6 * np.abs(b) + 1e-8)


def test_convex_continuation_fails_the_bracket(bench):
    params, env, traders = bench
    bad = (ValueCoefficients(G1=1.0), ValueCoefficients(G1=1.0))
    st = MarketState(wealth=(0.0, 0.0), price=100.0, remaining=(1e4, 1e4), time=9)
    with pytest.raises(BracketFailure):
        numeric_best_response(bad, 9, st, 0, 0.0, params, env, traders)


def test_explosive_integrand_is_reported(bench):
    params, env, traders = bench
    bad = (ValueCoefficients(L4=-1e9), ValueCoefficients(L4=-1e9))
    st = MarketState(wealth=(0.0, 0.0), price=100.0, remaining=(1e4, 1e4), time=9)
    with pytest.raises(IntegrandOverflow):
        quadrature_continuation(bad, 9, st, 0.0, 0.0, params, env, traders)
