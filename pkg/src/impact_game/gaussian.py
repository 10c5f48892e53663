"""Closed-form Gaussian expectations used by the backward recursion.

For ``(X, Y) ~ N(mu, Sigma)`` the quantity ``E[exp(a X^2 + b X + c Y)]`` is
the exponential of a quadratic in ``s = (b, c)`` and ``mu``::

    log E = 1/2 s' Pi s + s' Psi mu + 1/2 mu' Omega mu + kappa

with ``Pi = (Sigma^-1 - diag(2a, 0))^-1``, ``Psi = Pi Sigma^-1``,
``Omega = Sigma^-1 Pi Sigma^-1 - Sigma^-1`` and ``kappa`` the log of the
normalising ratio ``sqrt(det Pi / det Sigma)``.  Inverting ``Sigma`` is
impossible when a marginal is degenerate (zero volatility) and inaccurate
when one is tiny, so the same quantities are computed from a
Cholesky-type factor ``L`` with ``L L' = Sigma``::

    Pi = L D L',  D = diag(1 / (1 - 2 a sx^2), 1)
    Psi = I + 2 Pi A,  Omega = 2 A + 4 A Pi A,  A = diag(a, 0)
    kappa = -1/2 log(1 - 2 a sx^2)

which equal the inverse-based expressions whenever ``Sigma`` is invertible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite

PD_RTOL = 1e-12


@dataclass(frozen=True)
class BivariateGaussian:
    mu: tuple = (0.0, 0.0)
    sigma: tuple = (1.0, 1.0)
    rho_xy: float = 0.0

    def __post_init__(self):
        if len(self.mu) != 2 or len(self.sigma) != 2:
            raise ValueError("mu and sigma must be pairs")
        if min(self.sigma) < 0:
            raise ValueError("standard deviations must be >= 0")
        if not -1.0 < self.rho_xy < 1.0:
            raise ValueError("correlation must lie strictly inside (-1, 1)")
        object.__setattr__(self, "mu", (float(self.mu[0]), float(self.mu[1])))
        object.__setattr__(self, "sigma", (float(self.sigma[0]), float(self.sigma[1])))

    @property
    def cov(self) -> np.ndarray:
        sx, sy = self.sigma
        c = self.rho_xy * sx * sy
        return np.array([[sx * sx, c], [c, sy * sy]])

    @property
    def factor(self) -> np.ndarray:
        """Lower-triangular ``L`` with ``L L' = cov``, valid for zero volatilities."""
        sx, sy = self.sigma
        r = self.rho_xy
        return np.array([[sx, 0.0], [r * sy, sy * math.sqrt(1.0 - r * r)]])

    @property
    def degenerate(self) -> bool:
        return self.sigma[0] == 0.0 or self.sigma[1] == 0.0


@dataclass(frozen=True)
class QuadExpResult:
    value: float
    log_value: float
    pi: np.ndarray
    mu_a: float
    mu_b: float
    mu_c: float


@dataclass(frozen=True)
class LogMomentForm:
    """Coefficients of ``log E[exp(a X^2 + s'(X, Y))]`` as a quadratic in ``(s, mu)``.

    ``sigma_inv`` is ``None`` for a degenerate covariance.
    """

    pi: np.ndarray
    psi: np.ndarray
    omega: np.ndarray
    kappa: float
    sigma_inv: np.ndarray | None

    def log_expectation(self, s, mu) -> float:
        s = np.asarray(s, dtype=float)
        mu = np.asarray(mu, dtype=float)
        return float(0.5 * s @ self.pi @ s + s @ self.psi @ mu + 0.5 * mu @ self.omega @ mu + self.kappa)


def mgf_linear(g: BivariateGaussian, coeffs) -> float:
    """``E[exp(c1 X + c2 Y)]`` via the normality of linear combinations."""
    c = np.asarray(coeffs, dtype=float)
    mean = c @ np.asarray(g.mu)
    var = c @ g.cov @ c
    return math.exp(mean + 0.5 * var)


def _check_pd(cov, a):
    """``Sigma^-1 - diag(2a, 0)`` is positive definite iff ``1 - 2 a sigma_x^2 > 0``.

    Its determinant is ``det(Sigma^-1) (1 - 2 a sigma_x^2)`` and, for
    ``a <= 0``, it is a sum of a positive definite and a semidefinite
    matrix, so the scale-free factor alone decides.
    """
    shrink = 1.0 - 2.0 * a * cov[0, 0]
    if not shrink > PD_RTOL:
        raise NotPositiveDefinite(f"1 - 2 a sigma_x^2 = {shrink:.6g} <= 0; the expectation diverges")
    return shrink


def _cholesky(cov):
    sx = math.sqrt(cov[0, 0])
    low = cov[1, 0] / sx if sx > 0 else 0.0
    return np.array([[sx, 0.0], [low, math.sqrt(max(cov[1, 1] - low * low, 0.0))]])


def log_moment_form(g_cov: np.ndarray, a: float, factor: np.ndarray | None = None) -> LogMomentForm:
    """Build the log-moment coefficients for covariance ``g_cov`` and curvature ``a``.

    All coefficients come from a factor ``L`` with ``L L' = g_cov`` (computed
    when not supplied).  This needs no inverse, so it also covers singular
    covariances and stays accurate when one volatility is tiny, where
    ``Sigma^-1`` would cancel catastrophically.
    """
    g_cov = np.asarray(g_cov, dtype=float)
    A = np.array([[a, 0.0], [0.0, 0.0]])
    L = _cholesky(g_cov) if factor is None else np.asarray(factor, dtype=float)
    shrink = _check_pd(g_cov, a)
    D = np.diag([1.0 / shrink, 1.0])
    pi = L @ D @ L.T
    pi = 0.5 * (pi + pi.T)
    psi = np.eye(2) + 2.0 * pi @ A
    omega = 2.0 * A + 4.0 * A @ pi @ A
    kappa = -0.5 * math.log(shrink)
    singular = g_cov[0, 0] == 0.0 or g_cov[1, 1] == 0.0
    sigma_inv = None if singular else np.linalg.inv(g_cov)
    return LogMomentForm(pi, psi, omega, kappa, sigma_inv)


def quad_exp_expectation(g: BivariateGaussian, a: float, b: float, c: float) -> QuadExpResult:
    """``E[exp(a X^2 + b X + c Y)]`` in closed form.

    Raises :class:`NotPositiveDefinite` when ``Sigma^-1 - diag(2a, 0)`` is not
    positive definite, i.e. when the integral diverges.
    """
    mu = np.asarray(g.mu)
    s = np.array([b, c], dtype=float)
    form = log_moment_form(g.cov, a, g.factor)
    pi = form.pi
    log_value = form.log_expectation(s, mu)
    mu_bc = form.psi @ mu
    mu_a = mu @ form.omega @ mu
    log_value = float(log_value)
    value = math.exp(log_value) if log_value < 709.0 else math.inf
    return QuadExpResult(
        value=value,
        log_value=log_value,
        pi=pi,
        mu_a=float(mu_a),
        mu_b=float(mu_bc[0]),
        mu_c=float(mu_bc[1]),
    )
