"""Market primitives: parameters, state and the one-period transition.

Per-period parameters are stored as tuples of length ``T`` (index ``t - 1``
holds the value for period ``t``).  Scalars are broadcast on construction;
sequences are kept as given so that :func:`validate` can report a length
mismatch instead of silently truncating.

The environment convention is ``I_t = a_t - b_t * I_{t-1} + sigma_t * omega_t``
(note the minus sign: ``b = -1`` is a random walk).  The pair
``(I_t, eps_t)`` is drawn when period ``t`` is traded and moves the price
from ``P_t`` to ``P_{t+1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .errors import (
    Assumption32Violated,
    LengthMismatch,
    NonPositive,
    TimeOutOfRange,
    ValidationError,
)

Scalar = Union[float, int]
PerPeriod = Union[Scalar, Sequence[float]]


def _per_period(value, T):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise ValidationError(f"per-period value must be scalar or 1-D, got shape {arr.shape}")
    if arr.size == 1:
        arr = np.full(T, arr[0])
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class MarketParams:
    """Impact, resilience and horizon parameters.

    ``lam`` is the instantaneous impact per unit volume, ``alpha`` the
    temporary fraction, ``beta`` the permanent fraction and ``rho`` the
    resilience speed of the exponential decay kernel.
    """

    T: int
    lam: PerPeriod = 0.001
    alpha: PerPeriod = 0.5
    beta: PerPeriod = 0.5
    rho: float = 0.1

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise NonPositive("T", f"horizon must be a positive integer, got {self.T}")
        object.__setattr__(self, "T", int(self.T))
        for name in ("lam", "alpha", "beta"):
            object.__setattr__(self, name, _per_period(getattr(self, name), self.T))
        object.__setattr__(self, "rho", float(self.rho))

    @cached_property
    def decay(self) -> float:
        return decay_kernel(1.0, self.rho)

    def impact_sum(self, t: int) -> float:
        """``alpha_t * exp(-rho) + beta_t``, the share of impact seen next period."""
        return self.alpha[t - 1] * self.decay + self.beta[t - 1]


@dataclass(frozen=True)
class EnvParams:
    """AR(1) environment and news-noise law, one entry per period."""

    T: int
    a: PerPeriod = 0.0
    b: PerPeriod = 0.0
    sigma: PerPeriod = 0.01
    sigma_eps: PerPeriod = 0.02
    rho_env_eps: float = 0.0
    mu_eps: PerPeriod = 0.0

    def __post_init__(self):
        object.__setattr__(self, "T", int(self.T))
        for name in ("a", "b", "sigma", "sigma_eps", "mu_eps"):
            object.__setattr__(self, name, _per_period(getattr(self, name), self.T))
        object.__setattr__(self, "rho_env_eps", float(self.rho_env_eps))

    def shock_cov(self, t: int) -> np.ndarray:
        """Covariance of ``(I_t, eps_t)`` given ``I_{t-1}``."""
        sx, sy = self.sigma[t - 1], self.sigma_eps[t - 1]
        c = self.rho_env_eps * sx * sy
        return np.array([[sx * sx, c], [c, sy * sy]])

    def env_mean(self, t: int, env_prev):
        return self.a[t - 1] - self.b[t - 1] * env_prev


@dataclass(frozen=True)
class TraderSpec:
    inventory: float
    risk_aversion: float = 0.001
    wealth: float = 0.0

    def __post_init__(self):
        for name in ("inventory", "risk_aversion", "wealth"):
            object.__setattr__(self, name, float(getattr(self, name)))


@dataclass(frozen=True)
class MarketState:
    """State at the start of period ``time``.

    Fields may be floats or equally shaped numpy arrays (one entry per
    simulated path); :func:`step_state` only uses elementwise arithmetic.
    """

    wealth: tuple
    price: object
    remaining: tuple
    residual: object = 0.0
    env_prev: object = 0.0
    time: int = 1

    def swapped(self) -> "MarketState":
        """The same state seen with the trader labels exchanged."""
        return replace(
            self,
            wealth=(self.wealth[1], self.wealth[0]),
            remaining=(self.remaining[1], self.remaining[0]),
        )


def initial_state(traders, price=100.0) -> MarketState:
    t1, t2 = traders
    return MarketState(
        wealth=(t1.wealth, t2.wealth),
        price=float(price),
        remaining=(t1.inventory, t2.inventory),
        residual=0.0,
        env_prev=0.0,
        time=1,
    )


def decay_kernel(t, rho):
    """Exponential resilience kernel ``exp(-rho * t)``."""
    if np.any(np.asarray(t) < 0) or rho < 0:
        raise ValueError("decay_kernel needs t >= 0 and rho >= 0")
    return np.exp(-rho * np.asarray(t, dtype=float)) if np.ndim(t) else math.exp(-rho * t)


def validate(params: MarketParams, env: EnvParams, traders):
    """Check every parameter invariant; return the configuration unchanged."""
    T = params.T
    for name in ("lam", "alpha", "beta"):
        n = len(getattr(params, name))
        if n != T:
            raise LengthMismatch(name, n, T)
    if env.T != T:
        raise LengthMismatch("env.T", env.T, T)
    for name in ("a", "b", "sigma", "sigma_eps", "mu_eps"):
        n = len(getattr(env, name))
        if n != T:
            raise LengthMismatch(name, n, T)

    if not all(math.isfinite(x) and x > 0 for x in params.lam):
        raise NonPositive("lambda", "impact must be > 0 in every period")
    for name in ("alpha", "beta"):
        if not all(0.0 <= x <= 1.0 for x in getattr(params, name)):
            raise NonPositive(name, "must lie in [0, 1]")
    if not (params.rho >= 0 and math.isfinite(params.rho)):
        raise NonPositive("rho", "resilience speed must be >= 0")
    for t in range(1, T + 1):
        v = params.impact_sum(t)
        if not v < 1.0:
            raise Assumption32Violated(t, v)

    for name in ("sigma", "sigma_eps"):
        if not all(x >= 0 and math.isfinite(x) for x in getattr(env, name)):
            raise NonPositive(name, "volatility must be >= 0")
    if not -1.0 < env.rho_env_eps < 1.0:
        raise NonPositive("rho_env_eps", "correlation must lie strictly inside (-1, 1)")
    if any(x != 0.0 for x in env.mu_eps):
        raise ValidationError("mu_eps must be 0 in every period; the recursion assumes a centred news shock")
    if not all(math.isfinite(x) for x in env.a + env.b):
        raise ValidationError("environment drift coefficients must be finite")

    if len(traders) != 2:
        raise ValidationError("exactly two traders are required")
    for k, tr in enumerate(traders, start=1):
        if not tr.risk_aversion > 0:
            raise NonPositive(f"traders[{k}].risk_aversion", "gamma must be > 0")
        if not (math.isfinite(tr.inventory) and math.isfinite(tr.wealth)):
            raise ValidationError(f"trader {k} inventory and wealth must be finite")
    return params, env, traders


def step_state(state: MarketState, q, shocks, params: MarketParams, env: EnvParams) -> MarketState:
    """Apply one period of trading.

    ``q`` is the pair of executed volumes, ``shocks`` the pair
    ``(omega_t, eps_t)`` where ``omega_t`` is standard normal and ``eps_t``
    is the news shock already on its own scale.
    """
    t = state.time
    if not 1 <= t <= params.T:
        raise TimeOutOfRange(t, params.T)
    k = t - 1
    q1, q2 = q
    omega, eps = shocks
    lam = params.lam[k]
    decay = params.decay
    flow = q1 + q2

    env_now = env.a[k] - env.b[k] * state.env_prev + env.sigma[k] * omega
    residual = decay * (state.residual + params.alpha[k] * lam * flow)
    price = (
        state.price
        - (1.0 - decay) * state.residual
        + params.impact_sum(t) * lam * flow
        + env_now
        + eps
    )
    exec_price = state.price + lam * flow
    w1, w2 = state.wealth
    r1, r2 = state.remaining
    return MarketState(
        wealth=(w1 - exec_price * q1, w2 - exec_price * q2),
        price=price,
        remaining=(r1 - q1, r2 - q2),
        residual=residual,
        env_prev=env_now,
        time=t + 1,
    )
