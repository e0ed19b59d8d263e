"""Closed-form capacity bounds for the Laguerre channel with independent noise.

Three regimes are distinguished by which power constraints are active and
by the average-to-peak ratio ``alpha = E / A``:

* ``peak_avg_small_alpha``: both constraints, ``alpha < 1/3``;
* ``peak_only_or_large_alpha``: peak only, or ``alpha >= 1/3`` (the average
  constraint is then slack, since the best input has mean ``A/3``);
* ``avg_only``: average constraint only.

Values are in nats. Upper bounds drop a remainder that vanishes as the
dominant constraint grows and are flagged ``asymptotic``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate, optimize
from scipy.special import erf, gammainc, gammaincinv

from .channel import ChannelParams

__all__ = [
    "Regime",
    "PowerConstraints",
    "BoundResult",
    "MaxentDensity",
    "ExponentialDensity",
    "PointMass",
    "entropy_ub",
    "output_entropy_lb",
    "maxent_density",
    "mean_ratio",
    "solve_mu",
    "lower_bound",
    "upper_bound",
]

LOG_2PIE = math.log(2 * math.pi * math.e)
ALPHA_SLACK = 1.0 / 3.0


class Regime(str, Enum):
    PEAK_AVG_SMALL_ALPHA = "peak_avg_small_alpha"
    PEAK_ONLY_OR_LARGE_ALPHA = "peak_only_or_large_alpha"
    AVG_ONLY = "avg_only"


@dataclass(frozen=True)
class PowerConstraints:
    """Peak ``A`` and/or average ``E`` input constraint."""

    peak: float | None = None
    average: float | None = None

    def __post_init__(self):
        if self.peak is None and self.average is None:
            raise ValueError("at least one of peak and average must be given")
        for name, v in (("peak", self.peak), ("average", self.average)):
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} constraint must be positive, got {v}")

    @property
    def alpha(self) -> float | None:
        if self.peak is None or self.average is None:
            return None
        return min(self.average / self.peak, 1.0)

    @property
    def regime(self) -> Regime:
        if self.peak is None:
            return Regime.AVG_ONLY
        a = self.alpha
        if a is not None and a < ALPHA_SLACK:
            return Regime.PEAK_AVG_SMALL_ALPHA
        return Regime.PEAK_ONLY_OR_LARGE_ALPHA


@dataclass(frozen=True)
class BoundResult:
    value: float
    regime: Regime
    mu: float | None = None
    asymptotic: bool = False


# -- input densities ---------------------------------------------------------


class MaxentDensity:
    """Input density maximizing ``h(X) - E[log X]/2`` under the active constraints.

    ``both``:      sqrt(mu) / (sqrt(A pi x) erf(sqrt mu)) * exp(-mu x / A) on [0, A]
    ``peak_only``: 1 / sqrt(4 A x) on [0, A]
    ``avg_only``:  exp(-x / (2E)) / sqrt(2 pi E x) on [0, inf), a Gamma(1/2, 2E) law

    Expectations go through the substitution ``x = t**2`` which removes the
    ``x**-1/2`` endpoint singularity.
    """

    def __init__(self, regime: str, A: float | None = None, E: float | None = None,
                 mu: float | None = None):
        self.regime = regime
        if regime == "both":
            if A is None or mu is None or not (A > 0 and mu >= 0):
                raise ValueError("'both' density needs A > 0 and mu >= 0")
        elif regime == "peak_only":
            if A is None or not A > 0:
                raise ValueError("'peak_only' density needs A > 0")
        elif regime == "avg_only":
            if E is None or not E > 0:
                raise ValueError("'avg_only' density needs E > 0")
        else:
            raise ValueError(f"unknown density regime {regime!r}")
        self.A, self.E, self.mu = A, E, mu
        if regime == "both" and mu == 0:
            self.regime = "peak_only"

    def __repr__(self):
        return f"MaxentDensity({self.regime!r}, A={self.A}, E={self.E}, mu={self.mu})"

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            if self.regime == "avg_only":
                val = np.exp(-x / (2 * self.E)) / np.sqrt(2 * np.pi * self.E * x)
                return np.where(x >= 0, val, 0.0)
            if self.regime == "peak_only":
                val = 1.0 / np.sqrt(4 * self.A * x)
            else:
                mu, A = self.mu, self.A
                val = (math.sqrt(mu) / (np.sqrt(A * np.pi * x) * erf(math.sqrt(mu)))
                       * np.exp(-mu * x / A))
        return np.where((x >= 0) & (x <= self.A), val, 0.0)

    @property
    def t_range(self) -> tuple[float, float]:
        if self.regime == "avg_only":
            return 0.0, math.inf
        return 0.0, math.sqrt(self.A)

    def t_weight(self, t):
        """Density of ``T = sqrt(X)``, i.e. ``2 t pdf(t**2)``; smooth at 0."""
        t = np.asarray(t, dtype=float)
        if self.regime == "avg_only":
            return 2.0 * np.exp(-t * t / (2 * self.E)) / math.sqrt(2 * math.pi * self.E)
        if self.regime == "peak_only":
            return np.full_like(t, 1.0 / math.sqrt(self.A))
        mu, A = self.mu, self.A
        c = 2.0 * math.sqrt(mu) / (math.sqrt(A * math.pi) * erf(math.sqrt(mu)))
        return c * np.exp(-mu * t * t / A)

    def expect(self, f, epsabs=1e-13, epsrel=1e-11):
        """``E[f(X)]`` by adaptive quadrature in ``t = sqrt(x)``.

        ``f`` may return an array, in which case the result is a vector.
        """
        lo, hi = self.t_range
        val, err = integrate.quad_vec(lambda t: f(t * t) * self.t_weight(t), lo, hi,
                                      epsabs=epsabs, epsrel=epsrel, limit=2000)
        if not np.all(np.isfinite(val)):
            raise ArithmeticError(f"quadrature failed for {self!r}")
        return val

    def mean(self) -> float:
        return float(self.expect(lambda x: x))

    def expected_log(self) -> float:
        lo, hi = self.t_range
        g = lambda t: 2.0 * math.log(t) * float(self.t_weight(t)) if t > 0 else 0.0
        return integrate.quad(g, lo, hi, limit=500, epsabs=1e-12)[0]

    def differential_entropy(self) -> float:
        """``-E[log pdf(X)]`` with the ``-log(x)/2`` part folded into ``expected_log``."""
        e_log = self.expected_log()
        if self.regime == "peak_only":
            return math.log(2.0) + 0.5 * math.log(self.A) + 0.5 * e_log
        if self.regime == "avg_only":
            E = self.E
            return 0.5 * math.log(2 * math.pi * E) + 0.5 * e_log + self.mean() / (2 * E)
        mu, A = self.mu, self.A
        log_c = 0.5 * math.log(mu) - 0.5 * math.log(A * math.pi) - math.log(erf(math.sqrt(mu)))
        return -log_c + 0.5 * e_log + mu * self.mean() / A

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random(n)
        if self.regime == "peak_only":
            return self.A * u * u
        if self.regime == "avg_only":
            return 2.0 * self.E * gammaincinv(0.5, u)
        mu = self.mu
        return self.A * gammaincinv(0.5, u * gammainc(0.5, mu)) / mu


class ExponentialDensity:
    """Exponential input of mean ``eta``; its Laguerre output is geometric."""

    regime = "exponential"

    def __init__(self, eta: float):
        if not eta > 0:
            raise ValueError("eta must be positive")
        self.eta = eta

    def __repr__(self):
        return f"ExponentialDensity(eta={self.eta})"

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, np.exp(-x / self.eta) / self.eta, 0.0)

    def expect(self, f, epsabs=1e-13, epsrel=1e-11):
        val, _ = integrate.quad_vec(lambda x: f(x) * self.pdf(x), 0.0, math.inf,
                                    epsabs=epsabs, epsrel=epsrel, limit=2000)
        if not np.all(np.isfinite(val)):
            raise ArithmeticError(f"quadrature failed for {self!r}")
        return val

    def mean(self) -> float:
        return self.eta

    def differential_entropy(self) -> float:
        return 1.0 + math.log(self.eta)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.exponential(self.eta, n)


class PointMass:
    """Degenerate input fixed at ``x0``."""

    regime = "point"

    def __init__(self, x0: float):
        self.x0 = float(x0)

    def __repr__(self):
        return f"PointMass({self.x0})"

    def expect(self, f, **_):
        return np.asarray(f(self.x0), dtype=float)

    def mean(self) -> float:
        return self.x0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.full(n, self.x0)


# -- entropy inequalities ----------------------------------------------------


def entropy_ub(eta: float, lam: float) -> float:
    """Gaussian-with-continuity-correction bound on the output entropy.

    ``H(Y) <= 0.5 log(2 pi e (eta(1+2 lam) + lam(1+lam) + 1/12))`` for a
    Laguerre output whose input has mean ``eta``.
    """
    if eta < 0 or lam < 0:
        raise ValueError("eta and lam must be nonnegative")
    return 0.5 * (LOG_2PIE + math.log(eta * (1 + 2 * lam) + lam * (1 + lam) + 1 / 12))


def output_entropy_lb(h_x: float, eta: float, lam: float) -> float:
    """Lower bound on ``H(Y)`` from the input differential entropy ``h_x``.

    Obtained by comparing the input with the exponential law of the same
    mean ``eta`` (whose output is geometric) under data processing.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    s = eta + lam
    return h_x + math.log1p((1 + lam) / eta) + s * math.log1p(1 / s) - 1.0


def maxent_density(regime: str, A: float | None = None, E: float | None = None,
                   mu: float | None = None) -> MaxentDensity:
    """Build a maxent input density; for ``both`` a missing ``mu`` is solved from ``E/A``."""
    if regime == "both" and mu is None:
        if A is None or E is None:
            raise ValueError("'both' density needs A and either mu or E")
        mu = solve_mu(E / A)
    return MaxentDensity(regime, A=A, E=E, mu=mu)


# -- the mu parameter --------------------------------------------------------


def mean_ratio(mu: float) -> float:
    """``E[X]/A`` of the ``both`` density with parameter ``mu``.

    Equals ``1/(2 mu) - exp(-mu) / (sqrt(pi mu) erf(sqrt mu))``, written as a
    ratio of incomplete gamma functions so it stays accurate near ``mu = 0``.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if mu == 0:
        return ALPHA_SLACK
    return float(gammainc(1.5, mu) / (2.0 * mu * gammainc(0.5, mu)))


def _log_half_minus(mu: float) -> float:
    """``log(1/2 - alpha mu)`` when ``alpha = mean_ratio(mu)``, cancellation-free."""
    if mu == 0:
        return -math.log(2.0)
    return 0.5 * math.log(mu) - mu - 0.5 * math.log(math.pi) - math.log(erf(math.sqrt(mu)))


def _norm_factor(mu: float) -> float:
    """``exp(mu) (1/2 - alpha mu)`` under the same coupling, i.e. sqrt(mu)/(sqrt(pi) erf sqrt(mu))."""
    if mu == 0:
        return 0.5
    return math.sqrt(mu) / (math.sqrt(math.pi) * erf(math.sqrt(mu)))


def solve_mu(alpha: float, mode: str = "mean") -> float:
    """Parameter ``mu`` of the small-alpha bounds.

    ``mode="mean"`` (used by the bounds) returns the root of
    ``mean_ratio(mu) = alpha``: the density then meets the average
    constraint with equality. ``mode="upper"`` returns the stationary point
    ``1/(2 alpha) - 1/(1 - alpha)`` of ``-(1-alpha) mu - log(1/2 - alpha mu)``,
    kept for comparison only; fed to the upper bound it does not give a
    valid bound.
    """
    if not (0 < alpha < ALPHA_SLACK):
        raise ValueError(f"alpha must lie in (0, 1/3), got {alpha}")
    if mode == "upper":
        return 1 / (2 * alpha) - 1 / (1 - alpha)
    if mode != "mean":
        raise ValueError(f"unknown mu mode {mode!r}")
    hi = 1 / (2 * alpha) + 1.0
    return optimize.brentq(lambda m: mean_ratio(m) - alpha, 0.0, hi,
                           xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


# -- the bounds --------------------------------------------------------------


def _penalty_const(lam: float) -> float:
    # (12 lam (lam+1) + 1) / (12 (2 lam + 1))
    return (12 * lam * (lam + 1) + 1) / (12 * (2 * lam + 1))


def _log_correction(c_over_a: float) -> float:
    """``2 sqrt(r) arctan(1/sqrt(r)) + log(1 + r)`` with ``r = c/A``."""
    r = c_over_a
    return 2 * math.sqrt(r) * math.atan(1 / math.sqrt(r)) + math.log1p(r)


def _rate_tail(E: float, lam: float) -> float:
    s = E + lam
    return math.log1p((1 + lam) / E) + s * math.log1p(1 / s)


def peak_avg_lower(A: float, alpha: float, lam: float, E: float | None = None) -> float:
    """Small-alpha lower bound at ``E = alpha A`` (unless ``E`` is given).

    The two ``mu`` terms are evaluated through the identities that hold when
    ``mu = solve_mu(alpha)``; this stays finite as ``alpha -> 0`` where the
    direct ``1/2 - alpha mu`` cancels.
    """
    mu = solve_mu(alpha)
    if E is None:
        E = alpha * A
    c = _penalty_const(lam)
    return (0.5 * math.log(A) - (1 - alpha) * mu - _log_half_minus(mu)
            - _norm_factor(mu) * _log_correction(c / A)
            - 0.5 * math.log(2 * lam + 1) + _rate_tail(E, lam)
            - 0.5 * LOG_2PIE - 1.0)


def peak_lower(A: float, lam: float) -> float:
    c = _penalty_const(lam)
    r = c / A
    return (0.5 * math.log(A) + math.log1p(3 * (1 + lam) / A) - 1.0
            - 0.5 * math.log(math.pi * math.e / 2)
            + (A / 3 + lam) * math.log1p(3 / (A + 3 * lam))
            - 0.5 * math.log(2 * lam + 1)
            - math.sqrt(r) * math.atan(1 / math.sqrt(r)) - 0.5 * math.log1p(r))


def avg_lower(E: float, lam: float) -> float:
    return (0.5 * math.log(E)
            - math.sqrt((12 * math.pi * lam * (lam + 1) + math.pi) / (24 * E * (2 * lam + 1)))
            + _rate_tail(E, lam) - 0.5 * math.log(2 * lam + 1) - 1.0)


def lower_bound(constraints: PowerConstraints, params: ChannelParams) -> BoundResult:
    regime = constraints.regime
    lam = params.lam
    if regime is Regime.AVG_ONLY:
        return BoundResult(avg_lower(constraints.average, lam), regime)
    if regime is Regime.PEAK_ONLY_OR_LARGE_ALPHA:
        return BoundResult(peak_lower(constraints.peak, lam), regime, mu=0.0)
    alpha = constraints.alpha
    value = peak_avg_lower(constraints.peak, alpha, lam, E=constraints.average)
    return BoundResult(value, regime, mu=solve_mu(alpha))


def upper_bound(constraints: PowerConstraints) -> BoundResult:
    """Asymptotic upper bound inherited from the dark-current-free Poisson channel."""
    regime = constraints.regime
    if regime is Regime.AVG_ONLY:
        return BoundResult(0.5 * math.log(constraints.average), regime, asymptotic=True)
    A = constraints.peak
    if regime is Regime.PEAK_ONLY_OR_LARGE_ALPHA:
        value = 0.5 * math.log(A) - 0.5 * math.log(math.pi * math.e / 2)
        return BoundResult(value, regime, mu=0.0, asymptotic=True)
    alpha = constraints.alpha
    mu = solve_mu(alpha)
    value = 0.5 * math.log(A) - (1 - alpha) * mu - _log_half_minus(mu) - 0.5 * LOG_2PIE
    return BoundResult(value, regime, mu=mu, asymptotic=True)
