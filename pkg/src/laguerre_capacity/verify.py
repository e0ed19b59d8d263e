"""Numerical oracles for the channel law and the closed-form bounds.

* Blahut-Arimoto capacity of a discretized channel (optionally with an
  average-power cap), which sits above every valid lower bound;
* a seeded Monte-Carlo estimate of I(X;Y) for a given input density;
* generating-function identities (degradation through a Poisson channel,
  composition of per-photon kernels);
* the exponential-input mixing identity (geometric output).

``run_suite`` bundles the checks into named suites used by the CLI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln, logsumexp

from .bounds import (
    ALPHA_SLACK,
    ExponentialDensity,
    PowerConstraints,
    lower_bound,
    maxent_density,
    upper_bound,
)
from .cdma import (
    CdmaConfig,
    alpha_star,
    cdma_lower_bound,
    effective_params,
    optimal_users,
    sum_capacity,
)
from .channel import ChannelParams, PmfRow, _draw, log_pmf, mgf, moments, pmf_row, sample

__all__ = [
    "ConvergenceError",
    "DiscreteChannel",
    "MiEstimate",
    "CheckResult",
    "geometric_grid",
    "discretize",
    "blahut_arimoto",
    "mi_monte_carlo",
    "exponential_input_mi",
    "log_pmf_series",
    "check_degradation",
    "check_exp_mixing",
    "check_composition_lemma",
    "birth_death_kernel",
    "chi2_gof",
    "run_suite",
    "SUITES",
]


class ConvergenceError(RuntimeError):
    """Blahut-Arimoto stopped at ``max_iter`` with the duality gap still open."""

    def __init__(self, gap, iterations):
        super().__init__(f"no convergence after {iterations} iterations (gap {gap:.3e} nats)")
        self.gap = gap
        self.iterations = iterations


# -- discretized channels ----------------------------------------------------


@dataclass
class DiscreteChannel:
    """Finite-input channel: ``W[i, y]`` is the pmf row for ``inputs[i]``."""

    inputs: np.ndarray
    W: np.ndarray
    tail_tol: float

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        if np.any(np.diff(self.inputs) <= 0):
            raise ValueError("inputs must be strictly increasing")
        if self.W.shape[0] != len(self.inputs):
            raise ValueError("one pmf row per input required")
        if np.max(np.abs(self.W.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("pmf rows must sum to one")


def geometric_grid(peak: float, points: int, ratio: float = 1e-3) -> np.ndarray:
    """The point 0 plus ``points - 1`` geometrically spaced inputs on ``[ratio*peak, peak]``."""
    return np.concatenate([[0.0], np.geomspace(ratio * peak, peak, points - 1)])


def discretize(inputs, params: ChannelParams, tail_tol: float = 1e-10,
               gain: float = 1.0) -> DiscreteChannel:
    """Rectangular pmf matrix with a common ``y_max`` set by the largest-mean row.

    Row ``i`` holds the law of input ``gain * inputs[i]``; the declared tail
    mass of each row is folded back in by renormalization.
    """
    inputs = np.asarray(inputs, dtype=float)
    y_max = pmf_row(gain * inputs.max(), params, tail_tol).y_max
    y = np.arange(y_max + 1)
    W = np.exp(log_pmf(y[None, :], gain * inputs[:, None], params))
    W /= W.sum(axis=1, keepdims=True)
    return DiscreteChannel(inputs, W, tail_tol)


def _xlogx_rows(W):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(W > 0, W * np.log(W), 0.0).sum(axis=1)


def _ba_scores(W, neg_h, x, s, p):
    q = p @ W
    with np.errstate(divide="ignore"):
        log_q = np.where(q > 0, np.log(q), 0.0)
    D = neg_h - W @ log_q          # D_i = KL(W_i || q)
    score = D - s * x
    return D, score, math.fsum(p * score)


def _ba_fixed_multiplier(W, neg_h, x, s, p, tol, max_iter, history):
    """Iterate to the maximizer of ``I(p) - s E_p[X]``; returns ``(p, I, gap)``.

    The multiplicative step ``p_i *= exp(g * score_i)`` uses ``g = 1`` (the
    classical update) or a larger step while that keeps the objective from
    decreasing, so the objective sequence is nondecreasing either way.
    """
    # Warm starts may carry inputs with vanishing mass; multiplicative
    # updates cannot revive those, so blend in a little uniform mass.
    p = (1 - 1e-6) * p + 1e-6 / len(p)
    D, score, objective = _ba_scores(W, neg_h, x, s, p)
    step = 1.0
    for _ in range(max_iter):
        if history is not None:
            history.append(objective)
        gap = float(score.max() - objective)
        if gap < tol:
            return p, float(np.dot(p, D)), gap
        while True:
            logits = np.log(np.maximum(p, 1e-300)) + step * score
            p_new = np.exp(logits - logits.max())
            p_new /= p_new.sum()
            D_new, score_new, obj_new = _ba_scores(W, neg_h, x, s, p_new)
            if obj_new >= objective or step == 1.0:
                break
            step = max(1.0, 0.5 * step)
        p, D, score, objective = p_new, D_new, score_new, obj_new
        step *= 1.25
    raise ConvergenceError(gap, max_iter)


def blahut_arimoto(ch: DiscreteChannel, avg_cap: float | None = None, tol: float = 1e-7,
                   max_iter: int = 200_000, history: list | None = None):
    """Capacity (nats) and optimal input law of a discretized channel.

    ``tol`` bounds the duality gap ``max_i score_i - E_p[score]``, so the
    returned value is within ``tol`` of the fixed point. With ``avg_cap`` the
    Lagrange multiplier on ``E[X]`` is bisected (warm-started) until the
    optimal law meets the cap within 1e-6 relative. Objective values of every
    inner iteration are appended to ``history`` when a list is passed.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    W, x = ch.W, ch.inputs
    neg_h = _xlogx_rows(W)

    def solve(s, p):
        return _ba_fixed_multiplier(W, neg_h, x, s, p, tol, max_iter, history)

    p, cap, _ = solve(0.0, np.full(len(x), 1.0 / len(x)))
    if avg_cap is None or np.dot(p, x) <= avg_cap:
        return cap, p
    if avg_cap < x.min():
        raise ValueError("average cap below the smallest input")

    lo, hi = 0.0, 1.0
    while True:
        p, cap, _ = solve(hi, p)
        if np.dot(p, x) <= avg_cap:
            break
        lo, hi = hi, 2 * hi
    best = (cap, p)
    for _ in range(200):
        if avg_cap - np.dot(best[1], x) <= 1e-6 * avg_cap or hi - lo < 1e-14 * hi:
            break
        mid = 0.5 * (lo + hi)
        p, cap, _ = solve(mid, best[1])
        if np.dot(p, x) <= avg_cap:
            hi, best = mid, (cap, p)
        else:
            lo = mid
    return best


# -- Monte-Carlo mutual information -----------------------------------------


@dataclass(frozen=True)
class MiEstimate:
    value: float
    stderr: float
    n: int
    seed: int


def _output_log_pmf(density, ys: np.ndarray, params: ChannelParams, gain: float) -> np.ndarray:
    """``log R(y) = log E_X[W(y | gain X)]`` for each requested ``y``."""
    R = density.expect(lambda x: np.exp(log_pmf(ys, gain * x, params)))
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0) or not np.all(np.isfinite(R)):
        raise ArithmeticError(f"output pmf quadrature failed for {density!r}")
    return np.log(R)


def mi_monte_carlo(density, params: ChannelParams, n: int, seed: int,
                   gain: float = 1.0) -> MiEstimate:
    """Seeded estimate of ``I(X;Y)`` in nats for input ``density``.

    Averages ``log W(Y|X) - log R(Y)`` over ``n`` draws; ``R`` is the exact
    output pmf obtained by quadrature, so the estimator is unbiased. The
    standard error is the delete-one jackknife of the mean.
    """
    if n < 1000:
        raise ValueError("n must be at least 1000")
    rng = np.random.default_rng(seed)
    x = density.sample(rng, n)
    y = _draw(rng, gain * x, params.lam)
    ys, inv = np.unique(y, return_inverse=True)
    log_R = _output_log_pmf(density, ys, params, gain)
    terms = log_pmf(y, gain * x, params) - log_R[inv]
    total = math.fsum(terms)
    loo = (total - terms) / (n - 1)
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return MiEstimate(value=total / n, stderr=se, n=n, seed=seed)


def exponential_input_mi(eta: float, params: ChannelParams) -> float:
    """``I(X;Y)`` for exponential input: geometric output entropy minus ``E[H(Y|X)]``."""
    s = eta + params.lam
    h_out = (1 + s) * math.log1p(s) - (s * math.log(s) if s > 0 else 0.0)
    # Beyond 40 eta the weight is below 1e-17 while H(Y|X=x) grows like log x.
    h_cond = integrate.quad(
        lambda x: pmf_row(x, params, 1e-12).entropy() * math.exp(-x / eta) / eta,
        0, 40 * eta, epsabs=1e-11, limit=200)[0]
    return h_out - h_cond


# -- identities --------------------------------------------------------------


def log_pmf_series(y, x: float, params: ChannelParams) -> np.ndarray:
    """Law evaluated through the infinite hypergeometric series.

    ``exp(-x/lam)/(1+lam) (lam/(1+lam))**y sum_j t**j (y+j)!/((j!)**2 y!)``
    with ``t = x/(lam(1+lam))``, summed in the log domain until the terms are
    negligible. Independent of :func:`log_pmf`; needs ``lam > 0``, ``x > 0``.
    """
    lam = params.lam
    if lam <= 0 or x <= 0:
        raise ValueError("series form needs lam > 0 and x > 0")
    y = np.atleast_1d(np.asarray(y)).astype(float)
    t = x / (lam * (1 + lam))
    # largest term sits where t (y+j+1) = (j+1)**2
    j_peak = 0.5 * (t + math.sqrt(t * t + 4 * t * (y.max() + 1)))
    J = int(j_peak + 40 * math.sqrt(j_peak + 1) + 100)
    j = np.arange(J + 1, dtype=float)
    terms = (j[None, :] * math.log(t) + gammaln(y[:, None] + j[None, :] + 1)
             - 2 * gammaln(j[None, :] + 1) - gammaln(y[:, None] + 1))
    return (-x / lam - math.log1p(lam) + y * (math.log(lam) - math.log1p(lam))
            + logsumexp(terms, axis=1))


def check_degradation(x: float, lam: float, z_grid) -> float:
    """Max over ``z`` of ``|Psi_Lag(z) - Psi_Poisson(Psi_v1(z)) Psi_v2(z)|``."""
    worst = 0.0
    for z in z_grid:
        lhs = mgf("laguerre", z, x=x, lam=lam)
        rhs = mgf("poisson", mgf("birth_death", z, lam=lam), x=x) * mgf("bose_einstein", z, lam=lam)
        worst = max(worst, abs(lhs - rhs))
    return worst


def check_exp_mixing(eta: float, lam: float, y_max: int | None = None,
                     gain: float = 1.0) -> float:
    """Max over ``y`` of the gap between the exponential-input output and its geometric law.

    The output for input ``gain * X`` with ``X ~ Exp(eta)`` is compared to the
    geometric pmf of mean ``gain*eta + lam``. The mixture is computed by
    adaptive quadrature over ``x``.
    """
    m = gain * eta + lam
    r = m / (1 + m)
    if y_max is None:
        y_max = max(10, math.ceil(math.log(1e-9) / math.log(r))) if r > 0 else 10
    ys = np.arange(y_max + 1)
    params = ChannelParams(lam)
    mix, err = integrate.quad_vec(
        lambda x: np.exp(log_pmf(ys, gain * x, params) - x / eta) / eta,
        0.0, math.inf, epsabs=1e-14, epsrel=1e-12, limit=4000)
    if not np.all(np.isfinite(mix)):
        raise ArithmeticError("mixing quadrature failed")
    geo = r ** ys / (1 + m)
    return float(np.max(np.abs(mix - geo)))


def birth_death_kernel(lam: float, length: int) -> np.ndarray:
    """Per-photon output pmf with generating function ``(z + lam(1-z)) / (1 + lam(1-z))``."""
    r = lam / (1 + lam)
    y = np.arange(length)
    out = r ** np.maximum(y - 1, 0) / (1 + lam) ** 2
    out[0] = r
    return out


def check_composition_lemma(p1, p2, z_grid, length: int | None = None):
    """Compose a count law with i.i.d. per-count kernels and compare generating functions.

    ``p1[x]`` is the pmf of the intermediate count and ``p2[y]`` the output
    pmf produced by one count. The total law is built by explicit
    ``x``-fold convolution of ``p2`` mixed over ``p1``; its series is compared
    with ``sum_x p1[x] Psi_2(z)**x``. Returns ``(max_residual, p_tot)``.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if length is None:
        length = len(p1) * max(len(p2) - 1, 1) + 1
    p_tot = np.zeros(length)
    conv = np.zeros(length)
    conv[0] = 1.0
    for x, w in enumerate(p1):
        if x > 0:
            conv = np.convolve(conv, p2)[:length]
        p_tot += w * conv
    worst = 0.0
    for z in z_grid:
        lhs = math.fsum(p_tot * z ** np.arange(length))
        psi2 = math.fsum(p2 * z ** np.arange(len(p2)))
        rhs = math.fsum(p1 * psi2 ** np.arange(len(p1)))
        worst = max(worst, abs(lhs - rhs))
    return worst, p_tot


# -- suites ------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""


def _check(name, value, tol, passed=None, detail=""):
    if passed is None:
        passed = bool(value < tol)
    return CheckResult(name, float(value), float(tol), bool(passed), detail)


X_GRID = (0.0, 0.5, 1.0, 5.0, 20.0, 100.0)
LAM_GRID = (0.1, 1.0, 5.0)


def suite_pmf(seed):
    norm = mom = series = 0.0
    for lam in LAM_GRID:
        params = ChannelParams(lam)
        for x in X_GRID:
            row = pmf_row(x, params, 1e-12)
            mean, var = moments(x, params)
            norm = max(norm, abs(row.probs.sum() - 1))
            mom = max(mom, abs(row.mean() - mean), abs(row.variance() - var))
            if x > 0:
                y = np.arange(row.y_max + 1)
                series = max(series, float(np.max(np.abs(
                    np.exp(log_pmf_series(y, x, params)) - row.probs))))
    return [_check("pmf normalization", norm, 1e-9),
            _check("pmf mean/variance", mom, 1e-6),
            _check("finite sum vs series", series, 1e-10)]


def suite_limits(seed):
    tv = 0.0
    for x in (0.5, 4.0, 20.0):
        row = pmf_row(x, ChannelParams(1e-8), 1e-12)
        y = np.arange(row.y_max + 1)
        pois = stats.poisson.pmf(y, x)
        tv = max(tv, 0.5 * (np.abs(row.probs - pois).sum() + row.tail_mass + stats.poisson.sf(row.y_max, x)))
    geo = 0.0
    for lam in LAM_GRID:
        row = pmf_row(0.0, ChannelParams(lam), 1e-12)
        y = np.arange(row.y_max + 1)
        geo = max(geo, float(np.max(np.abs(row.probs - (lam / (1 + lam)) ** y / (1 + lam)))))
    return [_check("poisson limit TV", tv, 1e-5), _check("geometric at x=0", geo, 1e-14)]


def suite_mixing(seed):
    worst = max(check_exp_mixing(eta, lam) for eta in (0.5, 2.0, 10.0) for lam in (0.5, 2.0))
    cfg = CdmaConfig(10, 31, eta=5.0)
    gain, noise = effective_params(cfg)
    cd = check_exp_mixing(5.0, noise, gain=gain)
    return [_check("exponential mixing", worst, 1e-8), _check("exponential mixing cdma", cd, 1e-8)]


def suite_degradation(seed):
    z = np.append(np.arange(0.0, 1.0, 0.1), 0.99)
    worst = max(check_degradation(x, lam, z) for x in (0.0, 0.5, 5.0, 20.0) for lam in LAM_GRID)
    a, q = 3.0, 0.4
    p1 = stats.poisson.pmf(np.arange(80), a)
    comp, p_tot = check_composition_lemma(p1, np.array([1 - q, q]), z)
    thin = float(np.max(np.abs(p_tot[:60] - stats.poisson.pmf(np.arange(60), a * q))))
    return [_check("degradation identity", worst, 1e-10),
            _check("kernel composition", comp, 1e-10),
            _check("thinning oracle", thin, 1e-10)]


def sandwich_instances():
    return (("peak+avg A=50 a=0.2", PowerConstraints(50.0, 10.0), 50.0, 10.0),
            ("avg E=5", PowerConstraints(average=5.0), 20.0, 5.0))


def suite_sandwich(seed):
    out = []
    params = ChannelParams(1.0)
    for name, cons, peak, cap in sandwich_instances():
        lb = lower_bound(cons, params).value
        c64, _ = blahut_arimoto(discretize(geometric_grid(peak, 64), params), cap)
        c128, _ = blahut_arimoto(discretize(geometric_grid(peak, 128), params), cap)
        out.append(_check(f"LB <= BA+0.02 [{name}]", lb - c64, 0.02, passed=lb <= c64 + 0.02,
                          detail=f"lb={lb:.4f} ba={c64:.4f}"))
        out.append(_check(f"BA grid 64->128 [{name}]", abs(c128 - c64), 0.01))
    return out


def mc_instances():
    return (("both A=50 a=0.2", maxent_density("both", A=50.0, E=10.0), PowerConstraints(50.0, 10.0)),
            ("peak_only A=50", maxent_density("peak_only", A=50.0), PowerConstraints(peak=50.0)),
            ("avg_only E=5", maxent_density("avg_only", E=5.0), PowerConstraints(average=5.0)))


def suite_mc(seed, reps: int = 100, n_calib: int = 10_000):
    params = ChannelParams(1.0)
    out = []
    for k, (name, dens, cons) in enumerate(mc_instances()):
        est = mi_monte_carlo(dens, params, 100_000, seed + k)
        lb = lower_bound(cons, params).value
        margin = lb - 3 * est.stderr - est.value
        out.append(_check(f"MC >= LB - 3se [{name}]", margin, 0.0, passed=margin <= 0,
                          detail=f"mi={est.value:.4f}+-{est.stderr:.4f} lb={lb:.4f}"))
    eta = 2.0
    exact = exponential_input_mi(eta, params)
    dens = ExponentialDensity(eta)
    hits = 0
    for r in range(reps):
        est = mi_monte_carlo(dens, params, n_calib, seed + 1000 + r)
        hits += abs(est.value - exact) <= 3 * est.stderr
    need = math.ceil(0.99 * reps)
    out.append(_check("MC calibration hits", hits, need, passed=hits >= need,
                      detail=f"{hits}/{reps} within 3se"))
    return out


def suite_bounds(seed):
    params = ChannelParams(1.0)
    A = 300.0
    cont13 = abs(lower_bound(PowerConstraints(A, A * (ALPHA_SLACK - 1e-7)), params).value
                 - lower_bound(PowerConstraints(peak=A), params).value)
    E = 5.0
    cont0 = abs(lower_bound(PowerConstraints(E / 1e-5, E), params).value
                - lower_bound(PowerConstraints(average=E), params).value)
    decades = [1e3, 1e4, 1e5]
    lbs = [lower_bound(PowerConstraints(peak=a), params).value for a in decades]
    ubs = [upper_bound(PowerConstraints(peak=a)).value for a in decades]
    target = 0.5 * math.log(10)
    slope = max(abs(np.diff(v) / target - 1).max() for v in (lbs, ubs))
    gaps = np.subtract(ubs, lbs)
    return [_check("continuity alpha->1/3", cont13, 1e-3),
            _check("continuity alpha->0", cont0, 1e-3),
            _check("slope per decade (rel)", slope, 0.15),
            _check("gap non-increasing", float(np.max(np.diff(gaps))), 1e-12,
                   passed=bool(np.all(np.diff(gaps) <= 1e-12)))]


def suite_cdma(seed):
    A, E, N0 = 1000.0, 100.0, 31
    vals = [cdma_lower_bound(A, E, CdmaConfig(M, N0, E)).value for M in (2, 5, 10, 50, 200)]
    mono = float(np.max(np.diff(vals)))
    m_star = optimal_users(A, E, N0, 50)
    v = {M: sum_capacity(A, E, M, N0).value for M in range(max(2, m_star - 1), m_star + 2)}
    neigh = max(v[M] - v[m_star] for M in v)
    alphas = [alpha_star(a, e, CdmaConfig(10, N0, e), tracks)
              for a, e in ((100.0, 10.0), (100.0, 50.0), (1000.0, 100.0))
              for tracks in (False, True)]
    feasible = all(0 < a <= ALPHA_SLACK for a in alphas)
    fallback = alpha_star(100.0, 50.0, CdmaConfig(10, N0, 50.0)) == ALPHA_SLACK
    return [_check("cdma LB nonincreasing in M", mono, 0.0, passed=mono <= 0),
            _check("optimal M neighbour dominance", neigh, 0.0, passed=neigh <= 0,
                   detail=f"M*={m_star}"),
            _check("alpha* feasible, 1/3 fallback", 0.0, 0.0, passed=feasible and fallback)]


def suite_sampler(seed):
    x, lam, n = 4.0, 1.0, 1_000_000
    params = ChannelParams(lam)
    s = sample(x, params, n, seed)
    mean, var = moments(x, params)
    z_mean = abs(s.mean() - mean) / math.sqrt(var / n)
    # variance of the sample variance from the fourth central moment
    row = pmf_row(x, params, 1e-14)
    y = np.arange(row.y_max + 1)
    mu4 = float(np.dot((y - mean) ** 4, row.probs))
    z_var = abs(s.var(ddof=1) - var) / math.sqrt((mu4 - var ** 2) / n)
    p = chi2_gof(s, row)
    same = bool(np.array_equal(s, sample(x, params, n, seed)))
    return [_check("sampler mean (z)", z_mean, 5.0), _check("sampler variance (z)", z_var, 5.0),
            _check("sampler chi2 p-value", p, 1e-3, passed=p > 1e-3),
            _check("sampler reproducible", 0.0, 0.0, passed=same)]


def chi2_gof(samples: np.ndarray, row: PmfRow) -> float:
    """Chi-square p-value of integer samples against a pmf row.

    Bins with expected count >= 5 stay separate; all others, including
    counts beyond the row, are pooled into one bin.
    """
    n = len(samples)
    expected = n * row.probs
    counts = np.bincount(samples, minlength=len(expected))[: len(expected)]
    keep = expected >= 5
    obs = np.append(counts[keep], n - counts[keep].sum())
    exp = np.append(expected[keep], n - expected[keep].sum())
    return float(stats.chisquare(obs, exp).pvalue)


SUITES = {
    "pmf": suite_pmf,
    "limits": suite_limits,
    "mixing": suite_mixing,
    "degradation": suite_degradation,
    "sandwich": suite_sandwich,
    "mc": suite_mc,
    "bounds": suite_bounds,
    "cdma": suite_cdma,
    "sampler": suite_sampler,
}


def run_suite(name: str, seed: int) -> list[CheckResult]:
    names = list(SUITES) if name == "all" else [name]
    out = []
    for n in names:
        if n not in SUITES:
            raise ValueError(f"unknown suite {n!r}")
        out.extend(SUITES[n](seed))
    return out
