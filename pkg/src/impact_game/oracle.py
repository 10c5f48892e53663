"""Brute-force checks for the closed forms.

Nothing here reuses the recursion's algebra.  Continuation values are
integrated with a tensor Gauss-Hermite rule over the shock pair pushed
through :func:`market.step_state`, best responses are found by golden-section
search, equilibria by iterated best response, and the Gaussian kernel is
checked by plain Monte Carlo.

Utilities are handled as certainty equivalents ``-log(E[exp(-gamma x)]) / gamma``
computed with ``logsumexp``; the raw exponentials underflow at realistic
inventory sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.optimize import bracket

from .errors import BracketFailure, IntegrandOverflow, NoConvergence
from .gaussian import BivariateGaussian, quad_exp_expectation
from .market import EnvParams, MarketParams, MarketState, step_state
from .solver import ValueCoefficients


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor-product probabilists' Gauss-Hermite rule on two independent standard normals."""

    order: int = 64

    @property
    def nodes(self) -> np.ndarray:
        x, _ = hermegauss(self.order)
        g1, g2 = np.meshgrid(x, x, indexing="ij")
        return np.column_stack([g1.ravel(), g2.ravel()])

    @property
    def weights(self) -> np.ndarray:
        _, w = hermegauss(self.order)
        w = w / math.sqrt(2.0 * math.pi)
        return np.outer(w, w).ravel()

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    def integrate(self, f) -> float:
        """``E[f(xi)]`` for ``xi`` a standard bivariate normal; ``f`` maps (n, 2) nodes to (n,) values."""
        return float(self.weights @ f(self.nodes))


_RULES = {}


def _rule(order):
    if order not in _RULES:
        r = QuadratureRule(order)
        nodes = r.nodes
        _RULES[order] = (nodes, r.log_weights, 0.5 * np.sum(nodes * nodes, axis=1))
    return _RULES[order]


def _shock_map(t, env: EnvParams):
    """Map standard normal pairs ``xi`` to ``(omega, eps)`` with the period-``t`` law."""
    k = t - 1
    r = env.rho_env_eps
    s_eps = env.sigma_eps[k]

    def to_shocks(xi):
        omega = xi[..., 0]
        eps = s_eps * (r * xi[..., 0] + math.sqrt(1.0 - r * r) * xi[..., 1])
        return omega, eps

    return to_shocks


def _log_integrand(value_next, i, gamma, state, q, params, env, to_shocks):
    """``xi -> -gamma * CE^i_{t+1}`` along the exact transition."""
    j = 1 - i

    def ell(xi):
        nxt = step_state(state, q, to_shocks(xi), params, env)
        ce = value_next[i].certainty_equivalent(
            nxt.wealth[i], nxt.price, nxt.remaining[i], nxt.remaining[j], nxt.residual, nxt.env_prev
        )
        return -gamma * ce

    return ell


def _recentre(ell, h=1.0):
    """Fit a quadratic to ``ell(xi) - |xi|^2 / 2`` around 0; return its mode and a Cholesky scale."""
    pts = np.array([[0, 0], [h, 0], [-h, 0], [0, h], [0, -h], [h, h]], dtype=float)
    vals = ell(pts) - 0.5 * np.sum(pts * pts, axis=1)
    if not np.all(np.isfinite(vals)):
        raise IntegrandOverflow("log-integrand not finite on the recentring stencil")
    f0, fxp, fxm, fyp, fym, fxy = vals
    g = np.array([(fxp - fxm) / (2 * h), (fyp - fym) / (2 * h)])
    hxx = (fxp + fxm - 2 * f0) / h**2
    hyy = (fyp + fym - 2 * f0) / h**2
    hxy = (fxy - fxp - fyp + f0) / h**2
    neg_h = -np.array([[hxx, hxy], [hxy, hyy]])
    try:
        L = np.linalg.cholesky(neg_h)
    except np.linalg.LinAlgError:
        raise IntegrandOverflow(
            "effective objective is not concave in the shocks; the expectation diverges"
        ) from None
    mode = np.linalg.solve(neg_h, g)
    # scale C with C C' = (-H)^-1
    C = np.linalg.inv(L).T
    return mode, C


def log_expected_exp(ell, order=64, adaptive=True):
    """``log E[exp(ell(xi))]`` for a standard bivariate normal ``xi``."""
    nodes, logw, half_sq = _rule(order)
    if adaptive:
        mode, C = _recentre(ell)
        xi = mode + nodes @ C.T
        logdet = math.log(abs(C[0, 0] * C[1, 1] - C[0, 1] * C[1, 0]))
        terms = logw + ell(xi) - 0.5 * np.einsum("ij,ij->i", xi, xi) + half_sq
    else:
        logdet = 0.0
        terms = logw + ell(nodes)
    # max-shifted log-sum-exp; scipy's version costs more than the integrand here
    top = terms.max()
    out = logdet + top + math.log(np.exp(terms - top).sum())
    if not math.isfinite(out):
        raise IntegrandOverflow(f"quadrature produced a non-finite log-expectation ({out})")
    return float(out)


def quadrature_continuation(
    value_next,
    t: int,
    state: MarketState,
    q1,
    q2,
    params: MarketParams,
    env: EnvParams,
    traders,
    order: int = 64,
    adaptive: bool = True,
):
    """Certainty equivalents of ``E[V^i_{t+1}]`` for both traders after trading ``(q1, q2)``.

    ``value_next`` is the pair of date-``t+1`` value coefficients, or ``None``
    at ``t = T`` (the continuation is then terminal wealth, with ``-inf``
    for any inventory left over).
    """
    to_shocks = _shock_map(t, env)
    q = (float(q1), float(q2))
    out = np.empty(2)
    for i in range(2):
        gamma = traders[i].risk_aversion
        if value_next is None:
            nxt = step_state(state, q, (0.0, 0.0), params, env)
            if nxt.remaining[i] != 0.0:
                out[i] = -math.inf
                continue
            # wealth does not depend on the shocks of the final period
            out[i] = nxt.wealth[i]
            continue
        ell = _log_integrand(value_next, i, gamma, state, q, params, env, to_shocks)
        out[i] = -log_expected_exp(ell, order, adaptive) / gamma
    return out


def _objective(value_next, t, state, i, q_j_fixed, params, env, traders, order):
    def neg(qi):
        q = (qi, q_j_fixed) if i == 0 else (q_j_fixed, qi)
        return -quadrature_continuation(value_next, t, state, q[0], q[1], params, env, traders, order)[i]

    return neg


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_EPS = np.finfo(float).eps


def golden_section(f, a, b, c, xatol, maxiter=500):
    """Minimise ``f`` on a bracket ``a < b < c`` (or reversed) with ``f(b)`` below both ends.

    Unlike :func:`scipy.optimize.golden` the stopping rule is an absolute
    width, which matters for minimisers close to zero.
    """
    lo, hi = min(a, c), max(a, c)
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(maxiter):
        if hi - lo <= xatol:
            break
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 < f2 else (x2, f2)


def _parabolic_refine(neg, x):
    """Vertex of a least-squares parabola through five objective values around ``x``.

    The objective is a difference of large numbers, so a single comparison
    only resolves the maximiser to ``sqrt(rounding / curvature)``; a fit over
    a wider stencil resolves it to ``rounding / (curvature * width)``.
    Returns ``(vertex, standard error)``.
    """
    w = 1e-3 * (1.0 + abs(x)) + 1.0
    xs = x + w * np.arange(-2, 3)
    ys = np.array([neg(v) for v in xs])
    c2, c1, _ = np.polyfit((xs - x) / w, ys, 2)
    if not c2 > 0:
        raise BracketFailure(f"objective not concave near q={x:.6g}")
    vertex = x - w * c1 / (2.0 * c2)
    noise = 4.0 * _EPS * float(np.max(np.abs(ys)))
    return float(vertex), float(w * noise / c2)


def _best_response(neg, center, width, label):
    lo, hi = center - 0.5 * width, center + 0.5 * width
    try:
        a, b, c, fa, fb, fc, _ = bracket(neg, lo, hi, maxiter=200)
    except (RuntimeError, IntegrandOverflow) as exc:
        raise BracketFailure(f"no bracket for {label}: {exc}") from exc
    if not (fb <= fa and fb <= fc and math.isfinite(fb)):
        raise BracketFailure(f"objective not unimodal for {label}")
    x, _ = golden_section(neg, a, b, c, xatol=1e-4 * (1.0 + abs(b)))
    return _parabolic_refine(neg, x)


def numeric_best_response(
    value_next,
    t: int,
    state: MarketState,
    i: int,
    q_j_fixed: float,
    params: MarketParams,
    env: EnvParams,
    traders,
    center: float = 0.0,
    width: float | None = None,
    order: int = 64,
):
    """Maximise trader ``i``'s (0-based) quadrature objective over own volume.

    A downhill search from a bracket centred at ``center`` finds a triple
    enclosing the maximum, golden-section search narrows it, and a
    five-point parabolic fit polishes the result below the resolution a
    pairwise comparison of large certainty equivalents allows.
    """
    if value_next is None:
        return float(state.remaining[i])
    if width is None:
        width = 10.0 * (abs(center) + max(1.0, max(abs(x) for x in state.remaining)))
    neg = _objective(value_next, t, state, i, q_j_fixed, params, env, traders, order)
    x, _ = _best_response(neg, center, width, f"trader {i + 1} at t={t}")
    return x


def fixed_point_equilibrium(
    value_next,
    t: int,
    state: MarketState,
    params: MarketParams,
    env: EnvParams,
    traders,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    order: int = 64,
):
    """Iterate best responses from ``(0, 0)`` until the volumes stop moving.

    A change counts as settled when it is below ``tol * (1 + |q|)`` or
    below ten times the best response's own float64 resolution, whichever
    is larger.
    """
    if value_next is None:
        return float(state.remaining[0]), float(state.remaining[1])
    q = [0.0, 0.0]
    res = [0.0, 0.0]
    # the first sweep uses the full default bracket; later ones start from the last move,
    # the downhill bracket search widens it again if needed
    width = [10.0 * max(1.0, max(abs(x) for x in state.remaining))] * 2
    for _ in range(max_iter):
        prev = list(q)
        for k in range(2):
            neg = _objective(value_next, t, state, k, q[1 - k], params, env, traders, order)
            q[k], res[k] = _best_response(neg, q[k], width[k], f"trader {k + 1} at t={t}")
        width = [10.0 * abs(q[k] - prev[k]) + 1e-3 * (1.0 + abs(q[k])) + 1.0 for k in range(2)]
        if all(abs(q[k] - prev[k]) < max(tol * (1.0 + abs(q[k])), 10.0 * res[k]) for k in range(2)):
            return q[0], q[1]
    raise NoConvergence(f"iterated best response did not settle after {max_iter} rounds at t={t}")


def _probe_state(own, other, residual, env_prev, t):
    return MarketState(wealth=(0.0, 0.0), price=0.0, remaining=(own, other), residual=residual, env_prev=env_prev, time=t)


def oracle_value_coefficients(
    value_next,
    t: int,
    params: MarketParams,
    env: EnvParams,
    traders,
    steps=(1e3, 1e3, 1.0, 1.0),
    order: int = 64,
):
    """Recover date-``t`` value coefficients of both traders from equilibrium certainty equivalents.

    With zero wealth and price the certainty equivalent is exactly the
    quadratic ``z' M z``, so a 15-point finite-difference stencil over
    ``(Q1, Q2, R, I)`` determines every coefficient.
    """
    h = np.asarray(steps, dtype=float)
    cache = {}

    def f(offsets):
        key = tuple(offsets)
        if key not in cache:
            x = np.asarray(offsets, dtype=float) * h
            st = _probe_state(x[0], x[1], x[2], x[3], t)
            q = fixed_point_equilibrium(value_next, t, st, params, env, traders, order=order)
            cache[key] = quadrature_continuation(value_next, t, st, q[0], q[1], params, env, traders, order)
        return cache[key]

    zero = (0, 0, 0, 0)
    f0 = f(zero)
    M = np.zeros((2, 5, 5))
    for k in range(4):
        e = [0] * 4
        e[k] = 1
        fp = f(tuple(e))
        e[k] = -1
        fm = f(tuple(e))
        M[:, k, k] = (fp + fm - 2 * f0) / (2 * h[k] ** 2)
        M[:, k, 4] = M[:, 4, k] = (fp - fm) / (4 * h[k])
    for k in range(4):
        for m in range(k + 1, 4):
            ek = [0] * 4
            ek[k] = 1
            em = [0] * 4
            em[m] = 1
            both = [0] * 4
            both[k] = both[m] = 1
            cross = (f(tuple(both)) - f(tuple(ek)) - f(tuple(em)) + f0) / (h[k] * h[m])
            M[:, k, m] = M[:, m, k] = 0.5 * cross
    M[:, 4, 4] = f0
    # trader 2's own-first order swaps the two inventory slots
    perm = [1, 0, 2, 3, 4]
    M2 = M[1][np.ix_(perm, perm)]
    return ValueCoefficients.from_matrix(M[0]), ValueCoefficients.from_matrix(M2)


def mc_check_quad_exp(g: BivariateGaussian, a, b, c, n_samples=1_000_000, seed=0):
    """Compare the closed form of ``E[exp(a X^2 + b X + c Y)]`` with a Monte Carlo mean.

    Returns ``(closed_form, mc_estimate, std_error)``.
    """
    closed = quad_exp_expectation(g, a, b, c).value
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, 2))
    xy = np.asarray(g.mu) + z @ g.factor.T
    x, y = xy[:, 0], xy[:, 1]
    vals = np.exp(a * x * x + b * x + c * y)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_samples))
    return closed, est, se
