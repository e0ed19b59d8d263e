"""Laguerre photon-count channel law.

The conditional law of the photon count ``Y`` given input intensity ``x`` is
the noncentral negative binomial (Laguerre) distribution with mean ``x + lam``
where ``lam`` is the mean count contributed by narrowband Gaussian noise.

Everything is evaluated in the log domain through the finite Laguerre-
polynomial sum, which has only positive terms::

    W(y|x) = exp(-x/(1+lam)) / (1+lam) * (lam/(1+lam))**y
             * sum_{j=0}^{y} C(y, j) / j! * (x / (lam (1+lam)))**j

All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln, logsumexp

__all__ = [
    "ChannelParams",
    "PmfRow",
    "MgfKind",
    "log_pmf",
    "pmf_row",
    "moments",
    "mgf",
    "sample",
    "derive_seeds",
    "cdma_pmf_row",
]

# Rows of the (y, j) term grid processed at once in log_pmf.
_CHUNK_CELLS = 2_000_000


@dataclass(frozen=True)
class ChannelParams:
    """Noise mean ``lam`` (photons per symbol) of the Laguerre law."""

    lam: float

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"noise mean must be finite and >= 0, got {self.lam}")


@dataclass(frozen=True)
class PmfRow:
    """Truncated output distribution for one input intensity.

    ``probs[y]`` holds ``W(y|x)`` for ``y = 0 .. len(probs) - 1`` and
    ``tail_mass`` the probability of every larger count.
    """

    x: float
    probs: np.ndarray
    tail_mass: float

    @property
    def y_max(self) -> int:
        return len(self.probs) - 1

    def mean(self) -> float:
        y = np.arange(len(self.probs))
        return float(np.dot(y, self.probs))

    def variance(self) -> float:
        y = np.arange(len(self.probs))
        m = self.mean()
        return float(np.dot((y - m) ** 2, self.probs))

    def entropy(self) -> float:
        p = self.probs[self.probs > 0]
        return float(-np.dot(p, np.log(p)))


class MgfKind(str, Enum):
    POISSON = "poisson"
    BIRTH_DEATH = "birth_death"
    BOSE_EINSTEIN = "bose_einstein"
    LAGUERRE = "laguerre"


def _check_nonneg(name, value):
    if np.any(np.asarray(value) < 0) or not np.all(np.isfinite(value)):
        raise ValueError(f"{name} must be finite and nonnegative")


def log_pmf(y, x, params: ChannelParams):
    """Log-probability ``log W(y|x)`` in nats.

    ``y`` and ``x`` broadcast against each other; a scalar pair returns a
    float. ``lam == 0`` is the Poisson law and ``x == 0`` the geometric
    (Bose-Einstein) law, both handled analytically.
    """
    y_arr = np.asarray(y)
    x_arr = np.asarray(x, dtype=float)
    if y_arr.size and (np.any(y_arr < 0) or np.any(y_arr != np.floor(y_arr))):
        raise ValueError("counts y must be nonnegative integers")
    _check_nonneg("input intensity x", x_arr)
    y_arr = y_arr.astype(np.int64)
    scalar = y_arr.ndim == 0 and x_arr.ndim == 0
    y_b, x_b = np.broadcast_arrays(y_arr, x_arr)
    out = _log_pmf_flat(y_b.ravel(), x_b.ravel(), float(params.lam))
    out = out.reshape(y_b.shape)
    return float(out) if scalar else out


def _log_pmf_flat(y, x, lam):
    y_f = y.astype(float)
    if lam == 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -x + y_f * np.log(x) - gammaln(y_f + 1)
        # 0**0 = 1 for the degenerate x = 0 input.
        out = np.where((x == 0) & (y == 0), 0.0, out)
        return np.where((x == 0) & (y > 0), -np.inf, out)

    log1p_lam = math.log1p(lam)
    log_ratio = math.log(lam) - log1p_lam
    base = -x / (1.0 + lam) - log1p_lam + y_f * log_ratio
    out = base.copy()
    pos = x > 0
    if not np.any(pos):
        return out

    idx = np.flatnonzero(pos)
    log_t = np.log(x[idx]) - math.log(lam) - log1p_lam
    yy = y[idx]
    j_max = int(yy.max())
    j = np.arange(j_max + 1, dtype=float)
    log_jfact2 = 2.0 * gammaln(j + 1)
    rows = max(1, _CHUNK_CELLS // (j_max + 1))
    for start in range(0, len(idx), rows):
        sl = slice(start, start + rows)
        yc = yy[sl].astype(float)[:, None]
        terms = (
            j[None, :] * log_t[sl][:, None]
            - log_jfact2[None, :]
            + gammaln(yc + 1)
            - gammaln(np.maximum(yc - j[None, :], 0.0) + 1)
        )
        terms = np.where(j[None, :] <= yc, terms, -np.inf)
        out[idx[sl]] += logsumexp(terms, axis=1)
    return out


def moments(x: float, params: ChannelParams) -> tuple[float, float]:
    """Mean ``x + lam`` and variance ``x(1+2 lam) + lam(1+lam)``."""
    _check_nonneg("input intensity x", x)
    lam = params.lam
    return x + lam, x * (1 + 2 * lam) + lam * (1 + lam)


def pmf_row(x: float, params: ChannelParams, tail_tol: float = 1e-9) -> PmfRow:
    """Output pmf for input ``x`` truncated once the tail is below ``tail_tol``.

    The first window ends at ``ceil(mean + 10 std)`` and doubles until the
    retained mass reaches ``1 - tail_tol``.
    """
    if not (0 < tail_tol <= 1e-3):
        raise ValueError(f"tail_tol must lie in (0, 1e-3], got {tail_tol}")
    _check_nonneg("input intensity x", x)
    mean, var = moments(x, params)
    y_max = max(16, math.ceil(mean + 10 * math.sqrt(var)))
    while True:
        probs = np.exp(log_pmf(np.arange(y_max + 1), x, params))
        tail = max(0.0, 1.0 - math.fsum(probs))
        if tail <= tail_tol:
            return PmfRow(x=float(x), probs=probs, tail_mass=tail)
        y_max *= 2


def mgf(kind, z: float, x: float | None = None, lam: float | None = None) -> float:
    """Probability generating function ``E[z**Y]`` for ``z`` in [0, 1].

    The Laguerre kind is the direct series over the pmf row, truncated at
    tail mass 1e-14; the other kinds are closed forms.
    """
    kind = MgfKind(kind)
    if not (0.0 <= z <= 1.0):
        raise ValueError(f"z must lie in [0, 1], got {z}")
    if kind in (MgfKind.POISSON, MgfKind.LAGUERRE):
        if x is None:
            raise ValueError(f"{kind.value} generating function needs x")
        _check_nonneg("x", x)
    if kind is not MgfKind.POISSON:
        if lam is None:
            raise ValueError(f"{kind.value} generating function needs lam")
        _check_nonneg("lam", lam)

    if kind is MgfKind.POISSON:
        return math.exp(x * (z - 1.0))
    if kind is MgfKind.BIRTH_DEATH:
        return (z + lam * (1 - z)) / (1 + lam * (1 - z))
    if kind is MgfKind.BOSE_EINSTEIN:
        return 1.0 / (1 + lam * (1 - z))
    row = pmf_row(x, ChannelParams(lam), tail_tol=1e-14)
    powers = np.power(z, np.arange(len(row.probs), dtype=float))
    return math.fsum(row.probs * powers)


def derive_seeds(seed: int, count: int) -> list[int]:
    """Per-worker sub-seeds for splitting a sampling job.

    Worker ``k`` draws with ``derive_seeds(seed, count)[k]``; the rule is
    ``numpy.random.SeedSequence(seed).spawn(count)`` reduced to one 64-bit
    word each, so a partitioned run is reproducible from ``(seed, count)``.
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def sample(x: float, params: ChannelParams, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` photon counts for input ``x``.

    Each count is Poisson with intensity ``|sqrt(x) + G|**2`` where ``G`` is
    circular complex Gaussian with ``E|G|**2 = lam``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_nonneg("input intensity x", x)
    rng = np.random.default_rng(seed)
    return _draw(rng, np.full(n, float(x)), params.lam)


def _draw(rng: np.random.Generator, x: np.ndarray, lam: float) -> np.ndarray:
    s = math.sqrt(lam / 2.0)
    re = np.sqrt(x) + s * rng.standard_normal(x.shape)
    im = s * rng.standard_normal(x.shape)
    return rng.poisson(re * re + im * im)


def cdma_pmf_row(x: float, cfg, tail_tol: float = 1e-9) -> PmfRow:
    """Per-user CDMA output law: Laguerre with gain ``1/M`` and noise ``beta*eta``.

    ``cfg`` is a :class:`laguerre_capacity.cdma.CdmaConfig`. The returned
    row keeps ``x`` as the transmitted intensity.
    """
    row = pmf_row(x / cfg.M, ChannelParams(cfg.beta * cfg.eta), tail_tol)
    return PmfRow(x=float(x), probs=row.probs, tail_mass=row.tail_mass)
