"""Forward Monte Carlo of the equilibrium policy.

Random numbers are counter-based: the standard normals of period ``t`` for
paths ``[1024 b, 1024 (b + 1))`` come from a Philox stream keyed by
``(seed, t, b)``.  A path's draws therefore depend only on
``(seed, path, t)``, and blocks can be simulated in any order or on any
number of threads without changing a single bit of the output.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EmptySample, InventoryLeak
from .market import EnvParams, MarketParams, MarketState, initial_state, step_state
from .solver import EquilibriumSolution, policy_action

BLOCK = 1024
LEAK_TOL = 1e-9


@dataclass(frozen=True)
class SimulationConfig:
    num_paths: int = 10_000
    seed: int = 20240001
    max_workers: int | None = None

    def __post_init__(self):
        if int(self.num_paths) != self.num_paths or self.num_paths < 1:
            raise ValueError(f"num_paths must be a positive integer, got {self.num_paths}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.max_workers is not None and self.max_workers < 1:
            raise ValueError("max_workers must be positive")
        object.__setattr__(self, "num_paths", int(self.num_paths))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class PathRecord:
    """One simulated path.

    ``volumes`` has shape ``(T, 2)``; the state arrays have length ``T + 1``
    (entry ``t - 1`` is the state at the start of period ``t``, the last
    entry is after the final trade).  ``env_prev[t - 1]`` is ``I_{t-1}``.
    """

    volumes: np.ndarray
    price: np.ndarray
    residual: np.ndarray
    env_prev: np.ndarray
    remaining: np.ndarray
    wealth: np.ndarray


@dataclass(frozen=True)
class SimulationSummary:
    """Per-trader, per-period box-plot statistics of the executed volumes.

    Arrays indexed ``[t - 1, trader]`` have shape ``(T, 2)``.
    ``total_volume[t - 1]`` is the path average of ``|q1_t| + |q2_t|``.
    """

    mean: np.ndarray
    median: np.ndarray
    q1: np.ndarray
    q3: np.ndarray
    whisker_lo: np.ndarray
    whisker_hi: np.ndarray
    total_volume: np.ndarray
    wealth_mean: np.ndarray
    wealth_std: np.ndarray
    num_paths: int
    max_abs_residual: float
    max_terminal_inventory: float

    @property
    def T(self) -> int:
        return self.mean.shape[0]


def _block_normals(seed, t, block):
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, t, block])))
    return gen.standard_normal((BLOCK, 2))


def _to_shocks(z, t, env: EnvParams):
    k = t - 1
    r = env.rho_env_eps
    omega = z[..., 0]
    eps = env.sigma_eps[k] * (r * z[..., 0] + math.sqrt(1.0 - r * r) * z[..., 1])
    return omega, eps


def draw_shocks(seed: int, path_index: int, t: int, env: EnvParams):
    """``(omega_t, eps_t)`` of one path; identical to what :func:`simulate_paths` uses."""
    block, offset = divmod(int(path_index), BLOCK)
    z = _block_normals(seed, t, block)[offset]
    omega, eps = _to_shocks(z, t, env)
    return float(omega), float(eps)


def draw_shock_block(seed: int, block: int, t: int, env: EnvParams):
    """Shocks for the ``BLOCK`` paths starting at ``block * BLOCK``."""
    return _to_shocks(_block_normals(seed, t, block), t, env)


def _simulate_block(solution, params, env, start, seed, block, n, keep):
    T = params.T
    ones = np.ones(n)
    state = MarketState(
        wealth=(start.wealth[0] * ones, start.wealth[1] * ones),
        price=start.price * ones,
        remaining=(start.remaining[0] * ones, start.remaining[1] * ones),
        residual=0.0 * ones,
        env_prev=0.0 * ones,
        time=1,
    )
    vol = np.empty((T, 2, n))
    max_res = 0.0
    snaps = [] if keep else None
    for t in range(1, T + 1):
        max_res = max(max_res, float(np.max(np.abs(state.residual))))
        if keep:
            snaps.append(state)
        q1, q2 = policy_action(solution, t, state)
        vol[t - 1, 0] = q1
        vol[t - 1, 1] = q2
        omega, eps = draw_shock_block(seed, block, t, env)
        state = step_state(state, (vol[t - 1, 0], vol[t - 1, 1]), (omega[:n], eps[:n]), params, env)
    max_res = max(max_res, float(np.max(np.abs(state.residual))))
    if keep:
        snaps.append(state)
    return vol, state, max_res, snaps


def _records(vol, snaps):
    out = []
    n = vol.shape[2]
    stack = lambda f: np.array([f(s) for s in snaps])  # noqa: E731
    price = stack(lambda s: s.price)
    residual = stack(lambda s: s.residual)
    env_prev = stack(lambda s: s.env_prev)
    remaining = stack(lambda s: np.array(s.remaining))
    wealth = stack(lambda s: np.array(s.wealth))
    for p in range(n):
        out.append(
            PathRecord(
                volumes=vol[:, :, p].copy(),
                price=price[:, p].copy(),
                residual=residual[:, p].copy(),
                env_prev=env_prev[:, p].copy(),
                remaining=remaining[:, :, p].copy(),
                wealth=wealth[:, :, p].copy(),
            )
        )
    return out


def summarize(samples):
    """``(mean, median, q1, q3, whisker_lo, whisker_hi)`` of a 1-D sample.

    Quartiles interpolate linearly between order statistics; whiskers are
    the most extreme observations inside ``[q1 - 1.5 IQR, q3 + 1.5 IQR]``,
    never drawn inside the box when interpolated quartiles overshoot the data.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptySample("cannot summarize an empty sample")
    q1, med, q3 = (float(v) for v in np.percentile(x, [25, 50, 75]))
    # shifting by the median keeps the mean exact when there is no dispersion
    mean = med + float(np.mean(x - med))
    iqr = q3 - q1
    inside = x[(x >= q1 - 1.5 * iqr) & (x <= q3 + 1.5 * iqr)]
    return mean, med, q1, q3, min(float(inside.min()), q1), max(float(inside.max()), q3)


def _summarize_columns(vol):
    """Vectorised :func:`summarize` over the last axis of ``vol`` (shape ``(T, 2, N)``)."""
    q1, med, q3 = np.percentile(vol, [25, 50, 75], axis=2)
    mean = med + (vol - med[..., None]).mean(axis=2)
    iqr = q3 - q1
    lo_fence = (q1 - 1.5 * iqr)[..., None]
    hi_fence = (q3 + 1.5 * iqr)[..., None]
    inside = (vol >= lo_fence) & (vol <= hi_fence)
    w_lo = np.minimum(np.where(inside, vol, np.inf).min(axis=2), q1)
    w_hi = np.maximum(np.where(inside, vol, -np.inf).max(axis=2), q3)
    return mean, med, q1, q3, w_lo, w_hi


def simulate_paths(
    solution: EquilibriumSolution,
    params: MarketParams,
    env: EnvParams,
    traders,
    config: SimulationConfig,
    keep_paths: bool = False,
    initial_price: float = 100.0,
):
    """Simulate ``config.num_paths`` paths; return ``(summary, records or None)``."""
    start = initial_state(traders, initial_price)
    N = config.num_paths
    n_blocks = -(-N // BLOCK)
    sizes = [min(BLOCK, N - b * BLOCK) for b in range(n_blocks)]

    def run(b):
        return _simulate_block(solution, params, env, start, config.seed, b, sizes[b], keep_paths)

    workers = config.max_workers or 1
    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=min(workers, n_blocks)) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(b) for b in range(n_blocks)]

    vol = np.concatenate([p[0] for p in parts], axis=2)
    final_rem = np.concatenate([np.vstack(p[1].remaining) for p in parts], axis=1)
    final_w = np.concatenate([np.vstack(p[1].wealth) for p in parts], axis=1)
    max_res = max(p[2] for p in parts)
    leak = float(np.max(np.abs(final_rem)))
    if not leak <= LEAK_TOL:
        raise InventoryLeak(f"terminal inventory {leak:.3g} exceeds {LEAK_TOL:g} on some path")

    mean, med, q1, q3, w_lo, w_hi = _summarize_columns(vol)
    summary = SimulationSummary(
        mean=mean,
        median=med,
        q1=q1,
        q3=q3,
        whisker_lo=w_lo,
        whisker_hi=w_hi,
        total_volume=np.abs(vol).sum(axis=1).mean(axis=1),
        wealth_mean=final_w.mean(axis=1),
        wealth_std=final_w.std(axis=1, ddof=1) if N > 1 else np.zeros(2),
        num_paths=N,
        max_abs_residual=max_res,
        max_terminal_inventory=leak,
    )
    records = None
    if keep_paths:
        records = []
        for p in parts:
            records.extend(_records(p[0], p[3]))
    return summary, records
