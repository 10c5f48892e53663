"""Closed-form Markov perfect equilibrium for two large traders executing
against transient price impact and an AR(1) market environment, with a
Monte Carlo scenario lab and brute-force oracles for every closed form.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    Assumption32Violated,
    ConcavityLost,
    ImpactGameError,
    NumericalError,
    SingularEquilibrium,
    ValidationError,
)
from .gaussian import BivariateGaussian, mgf_linear, quad_exp_expectation  # noqa: E402
from .market import EnvParams, MarketParams, MarketState, TraderSpec, initial_state, step_state, validate  # noqa: E402
from .scenarios import Scenario, load_config, preset, run_scenario  # noqa: E402
from .simulate import SimulationConfig, simulate_paths, summarize  # noqa: E402
from .solver import (  # noqa: E402
    EquilibriumSolution,
    policy_action,
    solve_equilibrium,
    stage_objective,
)

__all__ = [
    "Assumption32Violated",
    "BivariateGaussian",
    "ConcavityLost",
    "EnvParams",
    "EquilibriumSolution",
    "ImpactGameError",
    "MarketParams",
    "MarketState",
    "NumericalError",
    "Scenario",
    "SimulationConfig",
    "SingularEquilibrium",
    "TraderSpec",
    "ValidationError",
    "initial_state",
    "load_config",
    "mgf_linear",
    "policy_action",
    "preset",
    "quad_exp_expectation",
    "run_scenario",
    "simulate_paths",
    "solve_equilibrium",
    "stage_objective",
    "step_state",
    "summarize",
    "validate",
]
