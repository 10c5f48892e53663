import math

import numpy as np
import pytest
from scipy import stats

from impact_game.errors import EmptySample
from impact_game.market import EnvParams, MarketParams, TraderSpec
from impact_game.simulate import (
    BLOCK,
    SimulationConfig,
    _summarize_columns,
    draw_shock_block,
    draw_shocks,
    simulate_paths,
    summarize,
)
from impact_game.solver import LIQUIDATE, EquilibriumSolution, PolicyCoefficients, solve_equilibrium


def _sample_shocks(env, n_blocks, t=1, seed=99):
    parts = [draw_shock_block(seed, b, t, env) for b in range(n_blocks)]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def test_zero_news_volatility():
    env = EnvParams(T=2, sigma_eps=0.0)
    _, eps = _sample_shocks(env, 4)
    assert np.all(eps == 0.0)


def test_independent_shocks():
    env = EnvParams(T=1, sigma=1.0, sigma_eps=1.0, rho_env_eps=0.0)
    omega, eps = _sample_shocks(env, 1_000_000 // BLOCK + 1)
    assert abs(np.corrcoef(omega, eps)[0, 1]) < 0.005


def test_correlated_shocks():
    env = EnvParams(T=1, sigma=1.0, sigma_eps=1.0, rho_env_eps=0.8)
    omega, eps = _sample_shocks(env, 1_000_000 // BLOCK + 1)
    assert abs(np.corrcoef(omega, eps)[0, 1] - 0.8) < 0.01
    assert np.std(eps) == pytest.approx(1.0, abs=0.005)


def test_draws_depend_only_on_seed_path_and_time():
    env = EnvParams(T=3, sigma_eps=0.5)
    omega, eps = draw_shock_block(7, 2, 3, env)
    assert draw_shocks(7, 2 * BLOCK + 5, 3, env) == (omega[5], eps[5])
    assert draw_shocks(7, 5, 3, env) != draw_shocks(7, 5, 2, env)
    assert draw_shocks(7, 5, 3, env) != draw_shocks(8, 5, 3, env)


def test_summarize_examples():
    assert summarize([5]) == (5.0,) * 6
    mean, med, q1, q3, lo, hi = summarize([1, 2, 3, 4, 100])
    assert (med, q1, q3) == (3.0, 2.0, 4.0)
    assert hi == 4.0 and lo == 1.0
    assert mean == 22.0
    m, md, *_ = summarize(np.linspace(-3, 3, 13))
    assert m == pytest.approx(0.0, abs=1e-15) and md == 0.0
    with pytest.raises(EmptySample):
        summarize([])
    # the interpolated q3 lies above every observation inside the fence
    assert summarize([0, 0, 0, 1])[3:] == (0.25, 0.0, 0.25)


def test_vectorised_summary_matches_scalar(rng):
    vol = rng.standard_t(3, size=(4, 2, 501))
    vol[1, 0] = np.round(vol[1, 0])
    cols = _summarize_columns(vol)
    for t in range(4):
        for i in range(2):
            want = summarize(vol[t, i])
            got = tuple(float(c[t, i]) for c in cols)
            assert got[1:] == want[1:]
            assert got[0] == pytest.approx(want[0], rel=1e-12, abs=1e-15)


def test_summary_ordering(bench, bench_solution):
    params, env, traders = bench
    s, _ = simulate_paths(bench_solution, params, env, traders, SimulationConfig(3000, seed=3))
    assert np.all(s.whisker_lo <= s.q1) and np.all(s.q1 <= s.median)
    assert np.all(s.median <= s.q3) and np.all(s.q3 <= s.whisker_hi)
    assert s.mean.shape == (10, 2) and s.total_volume.shape == (10,)


def test_deterministic_environment_has_no_dispersion(bench):
    params, _, traders = bench
    env = EnvParams(T=10, sigma=0.0, sigma_eps=0.0)
    sol = solve_equilibrium(params, env, traders)
    s, _ = simulate_paths(sol, params, env, traders, SimulationConfig(1500, seed=8))
    for f in (s.median, s.q1, s.q3, s.whisker_lo, s.whisker_hi):
        np.testing.assert_array_equal(f, s.mean)


def test_symmetric_traders_have_identical_summaries(bench, bench_solution):
    params, env, traders = bench
    s, _ = simulate_paths(bench_solution, params, env, traders, SimulationConfig(2000, seed=4))
    for f in (s.mean, s.median, s.q1, s.q3, s.whisker_lo, s.whisker_hi):
        np.testing.assert_array_equal(f[:, 0], f[:, 1])


def test_worker_count_does_not_change_results(bench, bench_solution):
    params, env, traders = bench
    a, _ = simulate_paths(bench_solution, params, env, traders, SimulationConfig(5000, seed=11, max_workers=1))
    b, _ = simulate_paths(bench_solution, params, env, traders, SimulationConfig(5000, seed=11, max_workers=4))
    c, recs = simulate_paths(bench_solution, params, env, traders, SimulationConfig(5000, seed=11), keep_paths=True)
    for f in ("mean", "median", "q1", "q3", "whisker_lo", "whisker_hi", "total_volume", "wealth_mean", "wealth_std"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
        np.testing.assert_array_equal(getattr(a, f), getattr(c, f))
    assert len(recs) == 5000


def test_path_records_are_consistent(bench):
    params, _, _ = bench
    env = EnvParams(T=10, a=0.2, b=-0.5, sigma=1.0, sigma_eps=0.1, rho_env_eps=0.3)
    traders = (TraderSpec(1e5), TraderSpec(-4e4, 0.003))
    sol = solve_equilibrium(params, env, traders)
    _, recs = simulate_paths(sol, params, env, traders, SimulationConfig(1100, seed=12), keep_paths=True)
    for p in (0, 1029):
        rec = recs[p]
        # conservation of inventory
        for i in range(2):
            assert abs(rec.volumes[:, i].sum() - traders[i].inventory) <= 1e-9
        assert np.all(rec.remaining[-1] == 0.0)
        # environment path follows the recorded shocks
        omega, _ = draw_shocks(12, p, 1, env)
        assert rec.env_prev[1] == pytest.approx(0.2 + 1.0 * omega)
        # wealth is minus the cash spent at execution prices
        for i in range(2):
            flow = rec.volumes.sum(axis=1)
            spent = np.sum((rec.price[:-1] + 0.001 * flow) * rec.volumes[:, i])
            assert rec.wealth[-1, i] == pytest.approx(-spent, rel=1e-12)


def test_price_law_without_trading():
    T = 6
    a, b, sigma, sigma_eps, r = 0.3, 0.5, 0.8, 0.2, 0.4
    params = MarketParams(T=T)
    env = EnvParams(T=T, a=a, b=b, sigma=sigma, sigma_eps=sigma_eps, rho_env_eps=r)
    traders = (TraderSpec(1.0), TraderSpec(1.0))
    idle = PolicyCoefficients(0.0, 0.0, 0.0, 0.0, 0.0)
    sol = EquilibriumSolution(params, env, traders, ((idle, idle),) * (T - 1) + ((LIQUIDATE, LIQUIDATE),), (), ())
    N = 20_000
    _, recs = simulate_paths(sol, params, env, traders, SimulationConfig(N, seed=31), keep_paths=True)
    moves = np.array([r.price[T - 1] - r.price[0] for r in recs])

    n = T - 1
    means, m = [], 0.0
    for _ in range(n):
        m = a - b * m
        means.append(m)
    # loading of each omega_k on the summed environment, plus its share of eps_k
    load = [sigma * sum((-b) ** (s - k) for s in range(k, n)) + sigma_eps * r for k in range(n)]
    var = sum(x * x for x in load) + n * sigma_eps**2 * (1 - r * r)

    se_mean = math.sqrt(var / N)
    assert abs(moves.mean() - sum(means)) < 3 * se_mean
    se_var = var * math.sqrt(2.0 / (N - 1))
    assert abs(moves.var(ddof=1) - var) < 3 * se_var


def test_near_normal_second_period_volume(bench):
    # with b = 0 the policy ignores the environment and q_2 is deterministic, so use an AR environment
    params, _, traders = bench
    env = EnvParams(T=10, b=0.5, sigma=1.0)
    sol = solve_equilibrium(params, env, traders)
    _, recs = simulate_paths(sol, params, env, traders, SimulationConfig(100_000, seed=41), keep_paths=True)
    q2 = np.array([r.volumes[1, 0] for r in recs])
    assert np.std(q2) > 0
    assert abs(stats.skew(q2)) < 0.05


def test_invalid_config():
    with pytest.raises(ValueError):
        SimulationConfig(num_paths=0)
    with pytest.raises(ValueError):
        SimulationConfig(seed=-1)
    with pytest.raises(ValueError):
        SimulationConfig(max_workers=0)
