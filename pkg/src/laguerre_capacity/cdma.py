"""Coherent optical CDMA network as a Laguerre channel with input-dependent noise.

With ``M`` users and code length ``N0``, user ``j``'s decoder passes its own
pulse at ``1/M`` of the sent intensity and every other user's at
``1/(M N0)``. Summing ``M - 1`` independent interferers of mean intensity
``eta`` gives noise mean ``beta * eta`` with ``beta = (M-1)/(M N0)``, so the
per-user channel is Laguerre with signal ``x/M`` and noise ``beta * eta``.

In the lower bounds the interferers are taken to use the average power
``E`` (noise ``beta * E``). With ``noise_tracks_alpha=True`` the noise
instead follows the realized average ``alpha * A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .bounds import (
    ALPHA_SLACK,
    BoundResult,
    Regime,
    _log_correction,
    _log_half_minus,
    _norm_factor,
    _penalty_const,
    LOG_2PIE,
    mean_ratio,
    solve_mu,
)

__all__ = [
    "CdmaConfig",
    "SumCapacityPoint",
    "decoder_intensity",
    "effective_params",
    "simulate_interference",
    "cdma_lower_bound",
    "alpha_star",
    "sum_capacity",
    "optimal_users",
]


def _check_users(M, N0):
    if int(M) != M or M < 2:
        raise ValueError(f"number of users M must be an integer >= 2, got {M}")
    if int(N0) != N0 or N0 < 1:
        raise ValueError(f"code length N0 must be an integer >= 1, got {N0}")


@dataclass(frozen=True)
class CdmaConfig:
    M: int
    N0: int
    eta: float = 1.0

    def __post_init__(self):
        _check_users(self.M, self.N0)
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be positive, got {self.eta}")

    @property
    def beta(self) -> float:
        return (self.M - 1) / (self.M * self.N0)


@dataclass(frozen=True)
class SumCapacityPoint:
    M: int
    value: float
    per_user: float


def decoder_intensity(I: float, M: int, N0: int, same_user: bool) -> float:
    """Intensity reaching a decoder output from a pulse of intensity ``I``."""
    _check_users(M, N0)
    if I < 0:
        raise ValueError("intensity must be nonnegative")
    return I / M if same_user else I / (M * N0)


def effective_params(cfg: CdmaConfig) -> tuple[float, float]:
    """``(gain, noise_mean)`` of the per-user Laguerre channel."""
    return 1.0 / cfg.M, cfg.beta * cfg.eta


def simulate_interference(cfg: CdmaConfig, trials: int, seed: int) -> np.ndarray:
    """Total cross-talk intensity at one decoder, one value per trial.

    Interferer intensities are i.i.d. exponential with mean ``cfg.eta``.
    """
    rng = np.random.default_rng(seed)
    out = np.empty(trials)
    for k in range(trials):
        I = rng.exponential(cfg.eta, cfg.M - 1)
        out[k] = math.fsum(I) / (cfg.M * cfg.N0)
    return out


# -- lower bounds ------------------------------------------------------------


def _peak_avg_value(alpha: float, A: float, E: float, M: int, beta: float,
                    mu: float | None = None) -> float:
    """Inner expression of the peak+average CDMA bound at ratio ``alpha``.

    ``E`` enters through the noise ``beta*E`` and the output-entropy term.
    ``mu`` must equal ``solve_mu(alpha)`` when given.
    """
    if mu is None:
        mu = 0.0 if alpha >= ALPHA_SLACK else solve_mu(alpha)
    lam = beta * E
    r = M * _penalty_const(lam) / A
    s = E / M + lam
    return (0.5 * math.log(A) - (1 - alpha) * mu - _log_half_minus(mu)
            - _norm_factor(mu) * _log_correction(r)
            + math.log(1 / M + (1 + lam) / E) - 0.5 * LOG_2PIE - 1.0
            - 0.5 * math.log((2 * lam + 1) / M) + s * math.log1p(1 / s))


def _avg_value(E: float, M: int, beta: float) -> float:
    lam = beta * E
    s = E / M + lam
    return (0.5 * math.log(E)
            - math.sqrt(M * math.pi * (12 * lam * (lam + 1) + 1) / (24 * E * (2 * lam + 1)))
            - 1.0 + s * math.log1p(1 / s)
            + math.log(1 / M + (1 + lam) / E) - 0.5 * math.log((2 * lam + 1) / M))


def _objective(A, E, cfg, noise_tracks_alpha):
    if noise_tracks_alpha:
        return lambda a, mu=None: _peak_avg_value(a, A, a * A, cfg.M, cfg.beta, mu)
    return lambda a, mu=None: _peak_avg_value(a, A, E, cfg.M, cfg.beta, mu)


def alpha_star(A: float, E: float | None, cfg: CdmaConfig,
               noise_tracks_alpha: bool = False) -> float:
    """Average-to-peak ratio maximizing the peak+average CDMA bound.

    The feasible range is ``(0, min(E/A, 1/3)]``. Stationary points are
    located on a log-spaced ``mu`` grid by sign changes of the finite-
    difference derivative and refined by bisection to 1e-8 in ``mu``.
    Without a stationary maximum the upper end of the range is returned,
    which is exactly 1/3 when the average constraint is slack.
    """
    if not A > 0:
        raise ValueError("A must be positive")
    hi = ALPHA_SLACK if E is None else min(E / A, ALPHA_SLACK)
    if not hi > 0:
        raise ValueError("E must be positive")
    f = _objective(A, E, cfg, noise_tracks_alpha)
    g = lambda mu: f(mean_ratio(mu), mu)

    mu_lo = 0.0 if hi >= ALPHA_SLACK else solve_mu(hi)
    mu_hi = solve_mu(hi * 1e-4)
    grid = np.geomspace(max(mu_lo, 1e-6), mu_hi, 400)
    if mu_lo > 0:
        grid[0] = mu_lo

    def dg(mu):
        h = 1e-6 * max(mu, 1e-3)
        lo = max(mu - h, mu_lo)
        return (g(mu + h) - g(lo)) / (mu + h - lo)

    slopes = np.array([dg(m) for m in grid])
    best_alpha, best_val = hi, f(hi)
    for k in range(len(grid) - 1):
        # A maximum in alpha is a maximum in mu (mu decreases with alpha).
        if slopes[k] > 0 >= slopes[k + 1]:
            root = optimize.bisect(dg, grid[k], grid[k + 1], xtol=1e-8, maxiter=200)
            a = mean_ratio(root)
            val = f(a)
            if val > best_val:
                best_alpha, best_val = a, val
    return float(best_alpha)


def cdma_lower_bound(A: float | None, E: float | None, cfg: CdmaConfig,
                     noise_tracks_alpha: bool = False) -> BoundResult:
    """Lower bound on the per-user capacity (nats per channel use).

    With only ``E`` the average-only bound is returned. Otherwise the
    peak+average bound is maximized over ``alpha``; with only ``A`` the
    interferers are taken at mean ``A/3``.
    """
    if A is None and E is None:
        raise ValueError("at least one of A and E must be given")
    if A is None:
        if not E > 0:
            raise ValueError("E must be positive")
        return BoundResult(float(_avg_value(E, cfg.M, cfg.beta)), Regime.AVG_ONLY)
    if not A > 0:
        raise ValueError("A must be positive")
    E_eff = A / 3 if E is None else E
    a = alpha_star(A, E_eff, cfg, noise_tracks_alpha)
    value = float(_objective(A, E_eff, cfg, noise_tracks_alpha)(a))
    if a >= ALPHA_SLACK:
        return BoundResult(value, Regime.PEAK_ONLY_OR_LARGE_ALPHA, mu=0.0)
    return BoundResult(value, Regime.PEAK_AVG_SMALL_ALPHA, mu=solve_mu(a))


def sum_capacity(A: float | None, E: float | None, M: int, N0: int,
                 noise_tracks_alpha: bool = False) -> SumCapacityPoint:
    """Aggregate lower bound ``M * C(A, E)`` over ``M`` non-cooperating users."""
    cfg = CdmaConfig(M, N0, eta=E if E is not None else A / 3)
    per_user = cdma_lower_bound(A, E, cfg, noise_tracks_alpha).value
    return SumCapacityPoint(M=M, value=M * per_user, per_user=per_user)


def optimal_users(A: float | None, E: float | None, N0: int, M_max: int,
                  noise_tracks_alpha: bool = False) -> int:
    """User count in ``2..M_max`` maximizing the sum capacity; ties go to smaller M."""
    if M_max < 2:
        raise ValueError("M_max must be >= 2")
    best_M, best = 2, -math.inf
    for M in range(2, int(M_max) + 1):
        v = sum_capacity(A, E, M, N0, noise_tracks_alpha).value
        if v > best:
            best_M, best = M, v
    return best_M
