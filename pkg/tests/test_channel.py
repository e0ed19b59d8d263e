import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.special import eval_laguerre

from laguerre_capacity.cdma import CdmaConfig
from laguerre_capacity.channel import (
    ChannelParams,
    cdma_pmf_row,
    derive_seeds,
    log_pmf,
    mgf,
    moments,
    pmf_row,
    sample,
)
from laguerre_capacity.verify import chi2_gof, log_pmf_series


def laguerre_poly_pmf(y, x, lam):
    """Oracle through scipy's Laguerre polynomial: the finite sum equals L_y(-t)."""
    t = x / (lam * (1 + lam))
    return (math.exp(-x / (1 + lam)) / (1 + lam) * (lam / (1 + lam)) ** y
            * eval_laguerre(y, -t))


class TestLogPmf:
    def test_geometric_at_zero_input(self):
        assert log_pmf(0, 0.0, ChannelParams(1.0)) == pytest.approx(math.log(0.5), abs=1e-15)

    def test_zero_count_closed_form(self):
        # the series sums to exp(t), leaving exp(-x/(1+lam))/(1+lam)
        np.testing.assert_allclose(log_pmf(0, 2.0, ChannelParams(1.0)), -1 - math.log(2), atol=1e-14)
        np.testing.assert_allclose(log_pmf_series([0], 2.0, ChannelParams(1.0)), -1 - math.log(2),
                                   atol=1e-12)

    def test_poisson_limit(self):
        target = stats.poisson.logpmf(3, 4.0)
        np.testing.assert_allclose(log_pmf(3, 4.0, ChannelParams(1e-10)), target, atol=1e-6)
        np.testing.assert_allclose(log_pmf(3, 4.0, ChannelParams(0.0)), target, atol=1e-13)

    @pytest.mark.parametrize("x,lam", [(0.5, 0.1), (5.0, 1.0), (20.0, 5.0), (3.0, 2.0)])
    def test_matches_laguerre_polynomial(self, x, lam):
        y = np.arange(40)
        oracle = np.array([laguerre_poly_pmf(int(k), x, lam) for k in y])
        np.testing.assert_allclose(np.exp(log_pmf(y, x, ChannelParams(lam))), oracle, rtol=1e-10)

    @pytest.mark.parametrize("x,lam", [(0.5, 0.1), (5.0, 1.0), (100.0, 5.0)])
    def test_matches_series_form(self, x, lam):
        params = ChannelParams(lam)
        y = np.arange(pmf_row(x, params).y_max + 1)
        np.testing.assert_allclose(np.exp(log_pmf(y, x, params)),
                                   np.exp(log_pmf_series(y, x, params)), atol=1e-12)

    def test_large_arguments_stay_finite(self):
        v = log_pmf(np.arange(0, 20000, 997), 1e4, ChannelParams(3.0))
        assert np.all(np.isfinite(v))

    def test_broadcasting_shape(self):
        out = log_pmf(np.arange(5)[:, None], np.array([0.0, 1.0, 2.0]), ChannelParams(1.0))
        assert out.shape == (5, 3)

    @pytest.mark.parametrize("y,x,lam", [(-1, 1.0, 1.0), (1.5, 1.0, 1.0), (1, -1.0, 1.0)])
    def test_domain_errors(self, y, x, lam):
        with pytest.raises(ValueError):
            log_pmf(y, x, ChannelParams(lam))

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError):
            ChannelParams(-0.1)


class TestPmfRow:
    def test_geometric_row(self):
        row = pmf_row(0.0, ChannelParams(1.0), 1e-9)
        y = np.arange(row.y_max + 1)
        np.testing.assert_allclose(row.probs, 2.0 ** -(y + 1), rtol=1e-14)

    def test_mean(self):
        row = pmf_row(5.0, ChannelParams(1.0), 1e-9)
        assert row.probs.sum() >= 1 - 1e-9
        assert abs(row.mean() - 6.0) < 1e-6

    def test_variance(self):
        row = pmf_row(5.0, ChannelParams(2.0), 1e-9)
        assert abs(row.variance() - 31.0) < 1e-6

    def test_tail_mass_bookkeeping(self):
        row = pmf_row(20.0, ChannelParams(1.0), 1e-9)
        assert row.tail_mass <= 1e-9
        assert abs(row.probs.sum() + row.tail_mass - 1) < 1e-12

    @pytest.mark.parametrize("tol", [0.0, 1e-2, -1e-9])
    def test_bad_tolerance(self, tol):
        with pytest.raises(ValueError):
            pmf_row(1.0, ChannelParams(1.0), tol)

    @settings(max_examples=40, deadline=None)
    @given(x=st.floats(0, 200), lam=st.floats(0, 10))
    def test_normalized_with_matching_moments(self, x, lam):
        params = ChannelParams(lam)
        row = pmf_row(x, params, 1e-10)
        mean, var = moments(x, params)
        assert abs(row.probs.sum() - 1) < 1e-9
        np.testing.assert_allclose([row.mean(), row.variance()], [mean, var], rtol=1e-6, atol=1e-6)


class TestMoments:
    @pytest.mark.parametrize("x,lam,expected", [(0, 0, (0, 0)), (3, 2, (5, 21)), (7, 0, (7, 7))])
    def test_values(self, x, lam, expected):
        assert moments(x, ChannelParams(lam)) == pytest.approx(expected)

    def test_negative_input(self):
        with pytest.raises(ValueError):
            moments(-1.0, ChannelParams(1.0))


class TestMgf:
    def test_fixed_values(self):
        assert mgf("birth_death", 1.0, lam=3.0) == pytest.approx(1.0)
        assert mgf("bose_einstein", 0.0, lam=1.0) == pytest.approx(0.5)
        np.testing.assert_allclose(mgf("laguerre", 0.0, x=2.0, lam=1.0), math.exp(-1) / 2, atol=1e-15)

    def test_laguerre_closed_form(self):
        for z in (0.0, 0.3, 0.9, 1.0):
            d = 1 + 1.5 * (1 - z)
            closed = math.exp(4.0 * (z - 1) / d) / d
            np.testing.assert_allclose(mgf("laguerre", z, x=4.0, lam=1.5), closed, atol=1e-13)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            mgf("poisson", 1.5, x=1.0)
        with pytest.raises(ValueError):
            mgf("laguerre", 0.5, lam=1.0)
        with pytest.raises(ValueError):
            mgf("cauchy", 0.5, x=1.0)


class TestSample:
    def test_no_signal_no_noise(self):
        assert np.all(sample(0.0, ChannelParams(0.0), 100, seed=1) == 0)

    def test_mean(self):
        s = sample(4.0, ChannelParams(1.0), 10**6, seed=7)
        mean, var = moments(4.0, ChannelParams(1.0))
        assert abs(s.mean() - mean) < 5 * math.sqrt(var / s.size)

    def test_geometric_gof(self):
        params = ChannelParams(1.0)
        s = sample(0.0, params, 10**6, seed=7)
        assert chi2_gof(s, pmf_row(0.0, params, 1e-12)) > 1e-3

    def test_reproducible(self):
        a = sample(3.0, ChannelParams(0.5), 1000, seed=11)
        np.testing.assert_array_equal(a, sample(3.0, ChannelParams(0.5), 1000, seed=11))
        assert not np.array_equal(a, sample(3.0, ChannelParams(0.5), 1000, seed=12))

    def test_derived_seeds(self):
        s = derive_seeds(5, 4)
        assert s == derive_seeds(5, 4)
        assert len(set(s)) == 4


class TestCdmaRow:
    def test_zero_input_is_geometric(self):
        cfg = CdmaConfig(10, 31, eta=5.0)
        row = cdma_pmf_row(0.0, cfg, 1e-12)
        noise = 9 / 310 * 5
        assert abs(row.mean() - noise) < 1e-9
        r = noise / (1 + noise)
        np.testing.assert_allclose(row.probs, r ** np.arange(row.y_max + 1) / (1 + noise), rtol=1e-12)

    def test_scaled_input(self):
        cfg = CdmaConfig(10, 31, eta=5.0)
        row = cdma_pmf_row(10.0, cfg, 1e-12)
        assert abs(row.mean() - (1.0 + 9 / 310 * 5)) < 1e-6
        ref = pmf_row(1.0, ChannelParams(cfg.beta * cfg.eta), 1e-12)
        np.testing.assert_array_equal(row.probs, ref.probs)
        assert row.x == 10.0
