"""Compare the closed-form equilibrium with a brute-force quadrature game.

At a handful of random states of a two-period game, each trader's best
response is found by numerically maximising the expected utility (2-D
Gauss-Hermite over the environment and news shocks) and iterated to a
fixed point. The result is printed next to the affine closed-form policy.
"""

import numpy as np

from impact_game import EnvParams, MarketParams, TraderSpec, policy_action, solve_equilibrium
from impact_game.oracle import fixed_point_equilibrium
from impact_game.verification import random_state


def main():
    params = MarketParams(T=2)
    env = EnvParams(T=2, a=0.1, b=0.4, sigma=1.0, sigma_eps=0.05, rho_env_eps=0.3)
    traders = (TraderSpec(1e5, 0.001), TraderSpec(-6e4, 0.004))
    solution = solve_equilibrium(params, env, traders)
    rng = np.random.default_rng(5)

    print("   closed q1     oracle q1     closed q2     oracle q2   max rel err")
    for _ in range(5):
        state = random_state(rng, 1)
        closed = policy_action(solution, 1, state)
        brute = fixed_point_equilibrium(solution.value[1], 1, state, params, env, traders)
        err = max(abs(x - y) / max(1.0, abs(y)) for x, y in zip(brute, closed))
        print(f"{closed[0]:12.3f}  {brute[0]:12.3f}  {closed[1]:12.3f}  {brute[1]:12.3f}  {err:11.1e}")


if __name__ == "__main__":
    main()
