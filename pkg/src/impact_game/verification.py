"""The oracle property suite behind ``impact-game verify``.

Each check compares a closed form with an independent numerical route at
benchmark parameters and returns a :class:`Check`.  Sample counts are sized
so the whole suite finishes in well under two minutes on one core.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ImpactGameError
from .gaussian import BivariateGaussian
from .market import EnvParams, MarketParams, MarketState, TraderSpec
from .oracle import (
    fixed_point_equilibrium,
    mc_check_quad_exp,
    numeric_best_response,
    quadrature_continuation,
)
from .simulate import SimulationConfig, simulate_paths
from .solver import policy_action, solve_equilibrium, stage_objective


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def benchmark(T=10, inventories=(1e5, 1e5), **env_kw):
    params = MarketParams(T=T)
    env = EnvParams(T=T, **env_kw)
    traders = (TraderSpec(inventories[0]), TraderSpec(inventories[1]))
    return params, env, traders


def random_state(rng, t, scale=2e5):
    return MarketState(
        wealth=(float(rng.uniform(-1e6, 1e6)), float(rng.uniform(-1e6, 1e6))),
        price=float(rng.uniform(50, 150)),
        remaining=(float(rng.uniform(-scale, scale)), float(rng.uniform(-scale, scale))),
        residual=float(rng.uniform(-50, 50)),
        env_prev=float(rng.normal(0, 1)),
        time=t,
    )


def rel_err(x, ref):
    return abs(x - ref) / (1.0 + abs(ref))


def random_kernel_case(rng):
    """A random admissible ``(g, a, b, c)`` whose MC estimator has finite variance."""
    sx, sy = rng.uniform(0.2, 1.5, 2)
    g = BivariateGaussian(mu=tuple(rng.uniform(-0.5, 0.5, 2)), sigma=(sx, sy), rho_xy=float(rng.uniform(-0.7, 0.7)))
    # keep 4 a sx^2 < 1 - rho^2 slack so that E[exp(2 (...))] is finite too
    a = float(rng.uniform(-0.5, 0.15 * (1 - g.rho_xy**2) / sx**2))
    b, c = (float(v) for v in rng.uniform(-0.6, 0.6, 2))
    return g, a, b, c


def check_kernel(n_cases=10, n_samples=200_000, seed=11):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(n_cases):
        g, a, b, c = random_kernel_case(rng)
        closed, est, se = mc_check_quad_exp(g, a, b, c, n_samples, seed + k)
        z = abs(est - closed) / se
        worst = max(worst, z)
        if z > 3 or abs(est - closed) > 0.01 * abs(closed):
            return Check("gaussian kernel vs Monte Carlo", False, f"case {k}: closed {closed:.6g}, mc {est:.6g} ({z:.2f} SE)")
    return Check("gaussian kernel vs Monte Carlo", True, f"{n_cases} cases, worst {worst:.2f} SE")


def check_continuation(n=20, seed=12):
    params, env, traders = benchmark()
    sol = solve_equilibrium(params, env, traders)
    rng = np.random.default_rng(seed)
    t = params.T - 1
    worst = 0.0
    for _ in range(n):
        st = random_state(rng, t)
        q = rng.uniform(-2e5, 2e5, 2)
        num = quadrature_continuation(sol.value[t], t, st, q[0], q[1], params, env, traders)
        for i in range(2):
            ref = stage_objective(sol, t, st, i + 1, q[i], q[1 - i])
            worst = max(worst, abs(num[i] - ref) / abs(ref))
    return Check("quadrature continuation vs closed form (t = T-1)", worst < 1e-8, f"worst relative error {worst:.2e}")


def check_order(seed=13):
    params, env, traders = benchmark(T=2)
    sol = solve_equilibrium(params, env, traders)
    st = random_state(np.random.default_rng(seed), 1)
    a = fixed_point_equilibrium(sol.value[1], 1, st, params, env, traders, order=32)
    b = fixed_point_equilibrium(sol.value[1], 1, st, params, env, traders, order=64)
    worst = max(rel_err(x, y) for x, y in zip(a, b))
    return Check("quadrature order 32 vs 64", worst < 1e-8, f"max change {worst:.2e}")


def check_best_response(n=5, seed=14):
    params, env, traders = benchmark()
    sol = solve_equilibrium(params, env, traders)
    rng = np.random.default_rng(seed)
    t = params.T - 1
    worst = 0.0
    for _ in range(n):
        st = random_state(rng, t)
        qj = float(rng.uniform(-1e5, 1e5))
        for i in range(2):
            S = sol.stage[t - 1][i]
            own, other = st.remaining[i], st.remaining[1 - i]
            closed = (S.B * own + S.C * other + S.D * st.residual + S.F * st.env_prev + S.M + S.N * qj) / (2 * S.A)
            num = numeric_best_response(sol.value[t], t, st, i, qj, params, env, traders, center=closed)
            worst = max(worst, rel_err(num, closed))
    return Check("numeric best response vs closed form (t = T-1)", worst < 1e-4, f"worst {worst:.2e}")


def check_fixed_point(T, n, seed):
    params, env, traders = benchmark(T=T)
    sol = solve_equilibrium(params, env, traders)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        st = random_state(rng, 1)
        num = fixed_point_equilibrium(sol.value[1], 1, st, params, env, traders)
        ref = policy_action(sol, 1, st)
        worst = max(worst, *(rel_err(x, y) for x, y in zip(num, ref)))
    return Check(f"fixed-point equilibrium vs closed form (T = {T})", worst < 1e-4, f"{n} states, worst {worst:.2e}")


def check_deviation(n=100, seed=15):
    params, env, traders = benchmark()
    sol = solve_equilibrium(params, env, traders)
    rng = np.random.default_rng(seed)
    bad = 0
    for t in range(1, params.T):
        for _ in range(n):
            st = random_state(rng, t)
            q = policy_action(sol, t, st)
            for i in range(2):
                qi, qj = q[i], q[1 - i]
                d = 1e-2 * (abs(qi) + 1)
                f0 = stage_objective(sol, t, st, i + 1, qi, qj)
                if not (stage_objective(sol, t, st, i + 1, qi + d, qj) < f0 and stage_objective(sol, t, st, i + 1, qi - d, qj) < f0):
                    bad += 1
    return Check("one-stage deviation (closed form)", bad == 0, f"{bad} profitable deviations in {2 * n * (params.T - 1)} trials")


def check_structure():
    msgs = []
    ok = True
    params, env, traders = benchmark()
    sol = solve_equilibrium(params, env, traders)
    e_max = float(np.max(np.abs(sol.policy_table()[:, :, 4])))
    ok &= e_max < 1e-12
    msgs.append(f"max|e| {e_max:.1e}")
    p2, e2, t2 = benchmark(sigma=0.0, sigma_eps=0.0)
    s2 = solve_equilibrium(p2, e2, t2)
    summ, _ = simulate_paths(s2, p2, e2, t2, SimulationConfig(2000, 1))
    spread = float(np.max(summ.whisker_hi - summ.whisker_lo))
    ok &= spread == 0.0
    msgs.append(f"deterministic spread {spread:g}")
    summ, _ = simulate_paths(sol, params, env, traders, SimulationConfig(10_000, 1))
    ok &= summ.max_terminal_inventory <= 1e-9
    msgs.append(f"terminal inventory {summ.max_terminal_inventory:.1e}")
    pair = (TraderSpec(1e5, 0.001), TraderSpec(-5e4, 0.01))
    fwd = solve_equilibrium(params, env, pair)
    back = solve_equilibrium(params, env, pair[::-1])
    same = np.array_equal(fwd.policy_table(), back.policy_table()[:, ::-1])
    ok &= same
    msgs.append("exchange symmetry " + ("exact" if same else "broken"))
    return Check("structural properties", bool(ok), ", ".join(msgs))


CHECKS = (
    ("kernel", check_kernel),
    ("continuation", check_continuation),
    ("order", check_order),
    ("best_response", check_best_response),
    ("fixed_point_T2", lambda: check_fixed_point(2, 10, 16)),
    ("fixed_point_T3", lambda: check_fixed_point(3, 5, 17)),
    ("deviation", check_deviation),
    ("structure", check_structure),
)


def run_suite(report=print):
    results = []
    for key, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            res = fn()
        except ImpactGameError as exc:
            res = Check(key, False, f"{type(exc).__name__}: {exc}")
        res = Check(res.name, res.passed, res.detail, time.perf_counter() - t0)
        if report is not None:
            report(f"{'PASS' if res.passed else 'FAIL'}  {res.name}: {res.detail} [{res.seconds:.1f}s]")
        results.append(res)
    return results
