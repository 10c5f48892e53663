"""Backward induction for the two-trader Markov perfect equilibrium.

Each trader's value function has the form::

    V_t = -exp(-gamma * (W - P * Qi + z' M z)),   z = (Qi, Qj, R, I_{t-1}, 1)

with a symmetric 5x5 matrix ``M`` whose entries are the named coefficients
G1, G2, H1, ..., Z.  One step back, the certainty-equivalent of trading
``(q_i, q_j)`` is a quadratic form in ``v = (q_i, q_j, Qi, Qj, R, I, 1)``:
wealth increment, the continuation form pushed through the state
transition, and the log-moment of the Gaussian shocks.  The stage
coefficients A, B, ..., N and X, Y1..Y5 are read off that 7x7 form, the two
first-order conditions are solved jointly, and substituting the resulting
affine policies back yields the new value matrix.

Everything is built from the same code path for both traders (with the
state permuted to own-first order), so swapping the traders swaps the
tables exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConcavityLost, NumericalError, SingularEquilibrium, TimeOutOfRange
from .gaussian import LogMomentForm, log_moment_form
from .market import EnvParams, MarketParams, MarketState, TraderSpec

# positions inside v = (q_i, q_j, Qi, Qj, R, I, 1)
QI, QJ, BI, BJ, RR, II, ONE = range(7)
ZETA_RTOL = 1e-10

# (name, row, col, factor): coefficient = factor * M[row, col]
_VALUE_LAYOUT = (
    ("G1", 0, 0, 1.0),
    ("G2", 0, 4, 2.0),
    ("H1", 0, 2, 2.0),
    ("H2", 2, 2, 1.0),
    ("H3", 2, 4, 2.0),
    ("J1", 0, 1, 2.0),
    ("J2", 1, 2, 2.0),
    ("J3", 1, 1, 1.0),
    ("J4", 1, 4, 2.0),
    ("L1", 0, 3, 2.0),
    ("L2", 2, 3, 2.0),
    ("L3", 1, 3, 2.0),
    ("L4", 3, 3, 1.0),
    ("L5", 3, 4, 2.0),
    ("Z", 4, 4, 1.0),
)


@dataclass(frozen=True)
class ValueCoefficients:
    """One trader's value-function coefficients at one date.

    The quadratic part of the certainty equivalent reads
    ``G1 Qi^2 + G2 Qi + H1 Qi R + H2 R^2 + H3 R + J1 Qi Qj + J2 Qj R
    + J3 Qj^2 + J4 Qj + L1 Qi I + L2 R I + L3 Qj I + L4 I^2 + L5 I + Z``.
    """

    G1: float = 0.0
    G2: float = 0.0
    H1: float = 0.0
    H2: float = 0.0
    H3: float = 0.0
    J1: float = 0.0
    J2: float = 0.0
    J3: float = 0.0
    J4: float = 0.0
    L1: float = 0.0
    L2: float = 0.0
    L3: float = 0.0
    L4: float = 0.0
    L5: float = 0.0
    Z: float = 0.0

    def matrix(self) -> np.ndarray:
        M = np.zeros((5, 5))
        for name, r, c, k in _VALUE_LAYOUT:
            val = getattr(self, name) / k
            M[r, c] = val
            M[c, r] = val
        return M

    @classmethod
    def from_matrix(cls, M) -> "ValueCoefficients":
        M = np.asarray(M, dtype=float)
        return cls(**{name: float(k * 0.5 * (M[r, c] + M[c, r])) for name, r, c, k in _VALUE_LAYOUT})

    def as_tuple(self):
        return tuple(getattr(self, f.name) for f in fields(self))

    def certainty_equivalent(self, wealth, price, own, other, residual, env_prev):
        """``W - P Qi + z' M z``; works elementwise on arrays."""
        return (
            wealth
            - price * own
            + self.G1 * own * own
            + self.G2 * own
            + self.H1 * own * residual
            + self.H2 * residual * residual
            + self.H3 * residual
            + self.J1 * own * other
            + self.J2 * other * residual
            + self.J3 * other * other
            + self.J4 * other
            + self.L1 * own * env_prev
            + self.L2 * residual * env_prev
            + self.L3 * other * env_prev
            + self.L4 * env_prev * env_prev
            + self.L5 * env_prev
            + self.Z
        )


@dataclass(frozen=True)
class PolicyCoefficients:
    """``q = a + b Qi + c Qj + d R + e I_{t-1}`` for one trader at one date."""

    a: float
    b: float
    c: float
    d: float
    e: float

    def row(self) -> np.ndarray:
        """Coefficients in own-first state order ``(Qi, Qj, R, I, 1)``."""
        return np.array([self.b, self.c, self.d, self.e, self.a])

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d, self.e)


LIQUIDATE = PolicyCoefficients(0.0, 1.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class StageCoefficients:
    """Diagnostics of one trader's stage problem at date ``t``.

    ``form`` is the full 7x7 quadratic form of the certainty equivalent
    over ``(q_i, q_j, Qi, Qj, R, I, 1)`` (excluding ``W - P Qi``).
    ``sigma_inv`` is NaN when the shock covariance is singular.
    """

    A: float
    B: float
    C: float
    D: float
    F: float
    M: float
    N: float
    X: float
    Y1: float
    Y2: float
    Y3: float
    Y4: float
    Y5: float
    theta: float
    delta: float
    phi: float
    pi: np.ndarray
    sigma_inv: np.ndarray
    x: float
    zeta: float
    form: np.ndarray

    @property
    def pi11(self):
        return float(self.pi[0, 0])

    @property
    def pi12(self):
        return float(self.pi[0, 1])

    @property
    def pi22(self):
        return float(self.pi[1, 1])


@dataclass(frozen=True)
class EquilibriumSolution:
    """Policy, value and stage tables indexed by ``t - 1``; each entry is a pair (trader 1, trader 2).

    ``stage`` has ``T - 1`` entries (there is no stage problem at ``T``).
    """

    params: MarketParams
    env: EnvParams
    traders: tuple
    policy: tuple
    value: tuple
    stage: tuple

    @property
    def T(self) -> int:
        return self.params.T

    def policy_table(self) -> np.ndarray:
        """Array of shape ``(T, 2, 5)`` holding ``(a, b, c, d, e)``."""
        return np.array([[p.as_tuple() for p in pair] for pair in self.policy])

    def value_table(self) -> np.ndarray:
        """Array of shape ``(T, 2, 15)`` holding ``(G1, ..., Z)``."""
        return np.array([[v.as_tuple() for v in pair] for pair in self.value])


def terminal_coefficients(params: MarketParams, traders=None):
    """Value coefficients at ``T`` where both traders must liquidate."""
    lam = params.lam[params.T - 1]
    v = ValueCoefficients(G1=-lam, J1=-lam)
    return (v, v)


def _sym_outer(p, r, coef):
    """Symmetric matrix of the bilinear term ``coef * (p.v) * (r.v)``."""
    out = np.outer(p, r) * (0.5 * coef)
    return out + out.T


def _unit(k):
    e = np.zeros(7)
    e[k] = 1.0
    return e


def _stage_form(t, value_next: ValueCoefficients, gamma, params, env, moments: LogMomentForm):
    """Quadratic form of trader i's certainty equivalent at ``t`` plus ``(theta, delta, phi)``."""
    k = t - 1
    lam = params.lam[k]
    alpha = params.alpha[k]
    decay = params.decay
    Mn = value_next.matrix()
    eq, ej, bi, bj, er, ei, one = (_unit(n) for n in range(7))

    # linear map v -> z_{t+1} without the shock on the environment row
    T = np.zeros((5, 7))
    T[0] = bi - eq
    T[1] = bj - ej
    T[2] = decay * (er + alpha * lam * (eq + ej))
    T[4] = one
    left_i = bi - eq

    S = T.T @ Mn @ T
    S += _sym_outer(eq + ej, eq, -lam)
    S += _sym_outer(er, left_i, 1.0 - decay)
    S += _sym_outer(eq + ej, left_i, -params.impact_sum(t) * lam)

    # shocks enter as bx.v * X + M33 * X^2 + by.v * Y; X = I_t, Y = eps_t
    bx = 2.0 * (T.T @ Mn[:, 3]) - left_i
    by = -left_i
    mean_x = env.a[k] * one - env.b[k] * ei
    s_map = -gamma * np.vstack([bx, by])
    mu_map = np.vstack([mean_x, np.zeros(7)])
    cross = s_map.T @ moments.psi @ mu_map
    log_e = 0.5 * s_map.T @ moments.pi @ s_map + 0.5 * (cross + cross.T) + 0.5 * mu_map.T @ moments.omega @ mu_map
    S -= log_e / gamma
    S[ONE, ONE] -= moments.kappa / gamma
    S = 0.5 * (S + S.T)
    return S, (float(bx[QI]), float(bx[BI]), float(bx[QJ]))


def _moments(t, value_next, gamma, env):
    k = t - 1
    cov = env.shock_cov(t)
    r = env.rho_env_eps
    sx, sy = env.sigma[k], env.sigma_eps[k]
    factor = np.array([[sx, 0.0], [r * sy, sy * math.sqrt(1.0 - r * r)]])
    return log_moment_form(cov, -gamma * value_next.L4, factor)


def _read_stage(S, thetas, moments, gamma, zeta=float("nan")):
    theta, delta, phi = thetas
    sigma_inv = moments.sigma_inv if moments.sigma_inv is not None else np.full((2, 2), np.nan)
    return StageCoefficients(
        A=float(-S[QI, QI]),
        B=float(2 * S[QI, BI]),
        C=float(2 * S[QI, BJ]),
        D=float(2 * S[QI, RR]),
        F=float(2 * S[QI, II]),
        M=float(2 * S[QI, ONE]),
        N=float(2 * S[QI, QJ]),
        X=float(S[QJ, QJ]),
        Y1=float(2 * S[QJ, BI]),
        Y2=float(2 * S[QJ, RR]),
        Y3=float(2 * S[QJ, BJ]),
        Y4=float(2 * S[QJ, II]),
        Y5=float(2 * S[QJ, ONE]),
        theta=theta,
        delta=delta,
        phi=phi,
        pi=moments.pi,
        sigma_inv=sigma_inv,
        x=float(-moments.kappa / gamma),
        zeta=zeta,
        form=S,
    )


def _swap_state(row):
    """Re-express an own-first state row in the opponent's own-first order."""
    return np.array([row[1], row[0], row[2], row[3], row[4]])


def _own_response(st: StageCoefficients):
    """Best-response row ``(Qi, Qj, R, I, 1)`` and slope on ``q_j``."""
    base = np.array([st.B, st.C, st.D, st.F, st.M]) / (2.0 * st.A)
    return base, st.N / (2.0 * st.A)


def _value_from_form(S, own_row, other_row):
    P = np.zeros((7, 5))
    P[QI] = own_row
    P[QJ] = other_row
    P[2:] = np.eye(5)
    return ValueCoefficients.from_matrix(P.T @ S @ P)


def backward_step(t, value_next, params: MarketParams, env: EnvParams, traders):
    """One backward-induction step from ``t + 1`` to ``t``.

    Returns ``(stage, policy, value)``, each a pair indexed by trader.
    """
    if not 1 <= t <= params.T - 1:
        raise TimeOutOfRange(t, params.T - 1)
    forms = []
    for i in range(2):
        gamma = traders[i].risk_aversion
        moments = _moments(t, value_next[i], gamma, env)
        S, thetas = _stage_form(t, value_next[i], gamma, params, env, moments)
        forms.append((S, thetas, moments, gamma))

    pre = [_read_stage(S, th, m, g) for S, th, m, g in forms]
    for i, st in enumerate(pre):
        if not st.A > 0:
            raise ConcavityLost(t, i + 1, st.A)

    # q_i = base_i . z_i + slope_i * q_j  (rows in each trader's own order)
    base = [None, None]
    slope = [0.0, 0.0]
    for i in range(2):
        base[i], slope[i] = _own_response(pre[i])
    zetas = []
    rows = []
    for i in range(2):
        j = 1 - i
        A_i, A_j = pre[i].A, pre[j].A
        N_i, N_j = pre[i].N, pre[j].N
        zeta = 2.0 * A_i - N_i * N_j / (2.0 * A_j)
        if not abs(zeta) >= ZETA_RTOL * max(abs(A_i), abs(N_i)):
            raise SingularEquilibrium(t, zeta)
        zetas.append(zeta)
        own = np.array([pre[i].B, pre[i].C, pre[i].D, pre[i].F, pre[i].M])
        opp = _swap_state(np.array([pre[j].B, pre[j].C, pre[j].D, pre[j].F, pre[j].M]))
        rows.append((own + N_i * opp / (2.0 * A_j)) / zeta)

    stage, policy, value = [], [], []
    for i in range(2):
        j = 1 - i
        S, th, m, g = forms[i]
        stage.append(_read_stage(S, th, m, g, zetas[i]))
        r = rows[i]
        policy.append(PolicyCoefficients(a=float(r[4]), b=float(r[0]), c=float(r[1]), d=float(r[2]), e=float(r[3])))
        value.append(_value_from_form(S, rows[i], _swap_state(rows[j])))
    for v in value:
        if not all(math.isfinite(x) for x in v.as_tuple()):
            raise NumericalError(f"non-finite value coefficients at t={t}")
    return tuple(stage), tuple(policy), tuple(value)


def solve_equilibrium(params: MarketParams, env: EnvParams, traders) -> EquilibriumSolution:
    """Run the recursion from ``T`` down to 1."""
    traders = tuple(traders)
    T = params.T
    values = [None] * T
    policies = [None] * T
    stages = [None] * (T - 1)
    values[T - 1] = terminal_coefficients(params, traders)
    policies[T - 1] = (LIQUIDATE, LIQUIDATE)
    for t in range(T - 1, 0, -1):
        try:
            stages[t - 1], policies[t - 1], values[t - 1] = backward_step(t, values[t], params, env, traders)
        except NumericalError as exc:
            if f"t={t}" not in str(exc):
                exc.args = (f"{exc} (at t={t})",)
            raise
    return EquilibriumSolution(params, env, traders, tuple(policies), tuple(values), tuple(stages))


def solve_single_trader(params: MarketParams, env: EnvParams, trader: TraderSpec):
    """Optimal execution for one trader facing an opponent that never trades.

    Returns ``(policies, values)`` as lists indexed by ``t - 1``.  The
    opponent's inventory slot still exists in the state; with zero
    opponent inventory it plays no role.
    """
    T = params.T
    values = [None] * T
    policies = [None] * T
    lam = params.lam[T - 1]
    values[T - 1] = ValueCoefficients(G1=-lam)
    policies[T - 1] = LIQUIDATE
    zero = np.zeros(5)
    for t in range(T - 1, 0, -1):
        gamma = trader.risk_aversion
        moments = _moments(t, values[t], gamma, env)
        S, thetas = _stage_form(t, values[t], gamma, params, env, moments)
        st = _read_stage(S, thetas, moments, gamma)
        if not st.A > 0:
            raise ConcavityLost(t, 1, st.A)
        row, _ = _own_response(st)
        policies[t - 1] = PolicyCoefficients(a=float(row[4]), b=float(row[0]), c=float(row[1]), d=float(row[2]), e=float(row[3]))
        values[t - 1] = _value_from_form(S, row, zero)
    return policies, values


def _own_first(state: MarketState, i: int):
    j = 1 - i
    return state.remaining[i], state.remaining[j], state.residual, state.env_prev


def policy_action(solution: EquilibriumSolution, t: int, state: MarketState):
    """Equilibrium volumes ``(q1, q2)`` at date ``t``; elementwise on array states."""
    if not 1 <= t <= solution.T:
        raise TimeOutOfRange(t, solution.T)
    if t == solution.T:
        return state.remaining[0], state.remaining[1]
    out = []
    for i in range(2):
        p = solution.policy[t - 1][i]
        own, other, residual, env_prev = _own_first(state, i)
        out.append(p.a + p.b * own + p.c * other + p.d * residual + p.e * env_prev)
    return out[0], out[1]


def stage_objective(solution: EquilibriumSolution, t: int, state: MarketState, i: int, q_i, q_j_fixed):
    """Trader ``i``'s (1-based) certainty equivalent of playing ``q_i`` against ``q_j_fixed``.

    This is the bracket inside ``-exp(-gamma * ...)`` of the conditional
    expected continuation utility.  At ``T`` any ``q_i`` other than the
    remaining inventory is infeasible and scores ``-inf``.
    """
    if not 1 <= t <= solution.T:
        raise TimeOutOfRange(t, solution.T)
    k = i - 1
    own, other, residual, env_prev = _own_first(state, k)
    wealth = state.wealth[k]
    if t == solution.T:
        lam = solution.params.lam[t - 1]
        ce = wealth - (state.price + lam * (q_i + q_j_fixed)) * q_i
        return np.where(q_i == own, ce, -np.inf) if np.ndim(q_i) else (ce if q_i == own else -math.inf)
    S = solution.stage[t - 1][k].form
    v = (q_i, q_j_fixed, own, other, residual, env_prev, 1.0)
    quad = sum(S[r, c] * v[r] * v[c] for r in range(7) for c in range(7))
    return wealth - state.price * own + quad
