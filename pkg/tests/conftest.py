import numpy as np
import pytest

from impact_game.market import EnvParams, MarketParams, TraderSpec
from impact_game.solver import solve_equilibrium

_CRITERIA = []


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record and print one ``A<n> PASS|FAIL`` line, then assert on it."""

    def record(key, ok, detail):
        line = f"{key} {'PASS' if ok else 'FAIL'} {detail}"
        _CRITERIA.append(line)
        print(line)
        assert ok, line

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def bench():
    params = MarketParams(T=10)
    env = EnvParams(T=10)
    traders = (TraderSpec(1e5), TraderSpec(1e5))
    return params, env, traders


@pytest.fixture(scope="session")
def bench_solution(bench):
    return solve_equilibrium(*bench)
