from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from bootbandit.dist import (
    ExactProb,
    InvalidParameterError,
    RngStream,
    beta_cdf,
    binomial_pmf,
    binomial_tail_exact,
    kl_bernoulli,
    ks_statistic,
    sample_beta,
    sample_binomial,
    sample_exponential,
    sample_gamma,
    sample_gaussian,
)
from conftest import total_variation

# P(Bino(17, 1/17) >= 17/4), summed with exact rational arithmetic
TAIL_17 = 0.0023967060838366357
# (1/4) log(17/4) + (3/4) log((3/4)/(16/17))
KL_QUARTER_17 = 0.1914366577575718


class TestRngStream:
    def test_replay_is_bit_exact(self):
        a = RngStream(7, (3,)).gen.random(100)
        b = RngStream(7, (3,)).gen.random(100)
        np.testing.assert_array_equal(a, b)

    def test_derived_streams_differ(self):
        draws = [RngStream.from_master(7, i).gen.random(8) for i in range(20)]
        for i in range(20):
            for j in range(i + 1, 20):
                assert not np.array_equal(draws[i], draws[j])

    def test_child_matches_explicit_path(self):
        a = RngStream(7, (1,)).child(2).gen.integers(0, 1 << 30, 5)
        b = RngStream(7, (1, 2)).gen.integers(0, 1 << 30, 5)
        np.testing.assert_array_equal(a, b)


class TestExactProb:
    @pytest.mark.parametrize("v", [0.5, 1e-12, 1e-200, 1.0])
    def test_value_round_trip(self, v):
        assert ExactProb(math.log(v)).value == pytest.approx(v, rel=1e-12)

    def test_minus_infinity_is_zero(self):
        assert ExactProb(-math.inf).value == 0.0


class TestSamplers:
    def test_exponential_moments(self, rng):
        x = sample_exponential(rng, 10**6)
        assert np.all(x > 0)
        assert abs(x.mean() - 1.0) < 0.005
        assert abs(x.var() - 1.0) < 0.01

    def test_gamma_shape_one_is_exponential(self, rng):
        x = sample_gamma(1.0, rng, 10**5)
        assert stats.kstest(x, "expon").statistic < 1.63 / math.sqrt(x.size)

    def test_gamma_shape_three_moments(self, rng):
        x = sample_gamma(3.0, rng, 10**6)
        assert abs(x.mean() - 3.0) < 0.01
        assert abs(x.var() - 3.0) < 0.05

    @pytest.mark.parametrize("shape", [0.0, -1.0, float("nan")])
    def test_gamma_rejects_bad_shape(self, rng, shape):
        with pytest.raises(InvalidParameterError):
            sample_gamma(shape, rng)

    def test_small_shape_gamma_mean(self, rng):
        x = sample_gamma(0.3, rng, 10**6)
        se = math.sqrt(0.3 / x.size)
        assert abs(x.mean() - 0.3) < 4 * se

    def test_beta_uniform(self, rng):
        x = sample_beta(1, 1, rng, 10**5)
        assert ks_statistic(x, lambda t: t) < 1.63 / math.sqrt(x.size)

    def test_beta_3_2_moments(self, rng):
        x = sample_beta(3, 2, rng, 10**5)
        assert abs(x.mean() - 0.6) < 0.005
        assert abs(x.var() - 0.04) < 0.003

    @pytest.mark.parametrize("a", [1, 2, 3, 5])
    @pytest.mark.parametrize("b", [1, 2, 3, 5])
    def test_beta_mean_within_three_se(self, a, b):
        x = sample_beta(a, b, RngStream(a * 10 + b), 2 * 10**4)
        mean = a / (a + b)
        var = a * b / ((a + b) ** 2 * (a + b + 1))
        assert abs(x.mean() - mean) < 3 * math.sqrt(var / x.size)

    def test_beta_rejects_zero(self, rng):
        with pytest.raises(InvalidParameterError):
            sample_beta(0, 1, rng)

    def test_binomial_edges(self, rng):
        assert np.all(sample_binomial(0, 0.3, rng, 100) == 0)
        assert np.all(sample_binomial(9, 1.0, rng, 100) == 9)

    def test_binomial_pmf_matches(self, rng):
        z = sample_binomial(6, 0.5, rng, 10**5)
        emp = np.bincount(z, minlength=7) / z.size
        exact = [math.comb(6, i) / 64 for i in range(7)]
        assert total_variation(emp, exact) < 0.01

    @pytest.mark.parametrize("p", [-0.1, 1.1, float("nan")])
    def test_binomial_rejects_bad_p(self, rng, p):
        with pytest.raises(InvalidParameterError):
            sample_binomial(3, p, rng)

    def test_gaussian(self, rng):
        assert sample_gaussian(0.7, 0.0, rng) == 0.7
        x = sample_gaussian(0.0, 1.0, rng, 10**6)
        assert abs(x.mean()) < 0.005
        assert abs(x.var() - 1.0) < 0.01
        with pytest.raises(InvalidParameterError):
            sample_gaussian(0.0, -1.0, rng)


class TestBinomialTail:
    def test_all_successes(self):
        assert binomial_tail_exact(7, 0.3, 7).value == pytest.approx(0.3**7, rel=1e-12)

    def test_two_coin_flips(self):
        assert binomial_tail_exact(2, 0.5, 1).value == pytest.approx(0.75, rel=1e-12)

    def test_frozen_oracle_and_bound(self):
        v = binomial_tail_exact(17, 1 / 17, 17 / 4).value
        assert v == pytest.approx(TAIL_17, rel=1e-10)
        assert v <= math.exp(-17 * kl_bernoulli(5 / 17, 1 / 17))

    def test_tiny_probabilities_stay_finite(self):
        t = binomial_tail_exact(202, 1 / 202, 202 / 4)
        assert t.log_value < -100  # Poisson(1) tail at 51 is about e^-151
        assert math.isfinite(t.log_value)

    @pytest.mark.parametrize(
        "n,p,k,expected",
        [(5, 0.3, 0, 1.0), (5, 0.3, -2, 1.0), (5, 0.3, 6, 0.0), (5, 0.0, 1, 0.0), (5, 1.0, 5, 1.0)],
    )
    def test_edges(self, n, p, k, expected):
        assert binomial_tail_exact(n, p, k).value == expected

    def test_matches_scipy(self):
        for n in (5, 40, 150):
            for p in (0.05, 0.3, 0.5):
                for k in (1, n // 3, n - 1):
                    ref = stats.binom.sf(k - 1, n, p)
                    assert binomial_tail_exact(n, p, k).value == pytest.approx(ref, rel=1e-9, abs=1e-300)

    def test_monotone_in_k_and_p(self):
        ps = np.linspace(0.05, 0.95, 10)
        for n in (10, 60):
            for p in ps:
                vals = [binomial_tail_exact(n, p, k).value for k in range(n + 1)]
                assert all(a >= b for a, b in zip(vals, vals[1:]))
            for k in (1, n // 2, n):
                vals = [binomial_tail_exact(n, p, k).value for p in ps]
                assert all(a <= b * (1 + 1e-12) for a, b in zip(vals, vals[1:]))

    def test_chernoff_bound_on_grid(self):
        for n in range(5, 201, 5):
            for p in np.arange(0.05, 0.501, 0.05):
                for k in (math.floor(n * p) + 1, math.ceil(0.7 * n), n - 1):
                    if not n * p < k < n:
                        continue
                    t = binomial_tail_exact(n, p, k)
                    assert t.log_value <= -n * kl_bernoulli(k / n, p) + 1e-12

    def test_pmf_sums_to_one(self):
        assert binomial_pmf(30, 0.2).sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_array_equal(binomial_pmf(3, 0.0), [1, 0, 0, 0])


class TestKL:
    def test_equal_arguments(self):
        assert kl_bernoulli(0.3, 0.3) == 0.0

    def test_frozen_value(self):
        assert kl_bernoulli(0.25, 1 / 17) == pytest.approx(KL_QUARTER_17, rel=1e-12)

    @given(st.floats(0.001, 0.999), st.floats(0.001, 0.999))
    def test_nonnegative(self, q, p):
        assert kl_bernoulli(q, p) >= 0.0

    @pytest.mark.parametrize("q,p", [(0.0, 0.5), (0.5, 1.0)])
    def test_boundary_rejected(self, q, p):
        with pytest.raises(InvalidParameterError):
            kl_bernoulli(q, p)


class TestKS:
    def test_single_sample_at_median(self):
        assert ks_statistic([0.5], lambda x: x) == pytest.approx(0.5)

    def test_exact_samples_pass(self, rng):
        x = sample_beta(3, 2, rng, 10**5)
        assert ks_statistic(x, beta_cdf(3, 2)) < 1.63 / math.sqrt(x.size)

    def test_mismatch_detected(self, rng):
        x = rng.gen.random(10**5)
        assert ks_statistic(x, beta_cdf(3, 2)) > 0.05

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=60))
    def test_agrees_with_scipy(self, xs):
        ours = ks_statistic(xs, stats.norm.cdf)
        ref = stats.kstest(xs, "norm").statistic
        assert ours == pytest.approx(ref, abs=1e-12)

    def test_unsorted_input(self):
        assert ks_statistic([0.9, 0.1, 0.5], lambda x: x) == ks_statistic([0.1, 0.5, 0.9], lambda x: x)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            ks_statistic([], lambda x: x)
