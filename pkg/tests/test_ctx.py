from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bootbandit.ctx import (
    CONTEXTUAL_POLICY_NAMES,
    ArmDataset,
    ContextModel,
    LinearBayesState,
    LinUCBPolicy,
    OptimizationError,
    fit_weighted_mle,
    linucb_select,
    lints_select,
    make_contextual_policy,
    make_pseudo_examples,
    npb_contextual_sample,
    wb_contextual_sample,
)
from bootbandit.dist import RngStream, beta_cdf, ks_statistic
from bootbandit.policy import ArmHistory, npb_bernoulli_sample
from conftest import total_variation


def featureless(rewards) -> ArmDataset:
    data = ArmDataset(1, [[1.0], [1.0]], [1.0, 0.0])
    for r in rewards:
        data.add([1.0], r)
    return data


class TestContextModel:
    def test_predict(self):
        m = ContextModel("logistic", [2.0, -1.0])
        assert m.predict([0.0, 0.0]) == 0.5
        assert 0 < m.predict([30.0, -30.0]) <= 1
        assert ContextModel("linear", [2.0]).predict([1.5]) == 3.0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ContextModel("probit", [1.0])


class TestFit:
    def test_linear_square_system(self):
        g = RngStream(3).gen
        X = g.normal(size=(3, 3)) + 2 * np.eye(3)
        y = g.normal(size=3)
        expected = np.linalg.solve(X, y)
        theta = fit_weighted_mle("linear", X, y, tol=1e-15, max_passes=200000, lr=0.1)
        np.testing.assert_allclose(theta, expected, atol=1e-6)

    def test_newton_matches_weighted_least_squares(self):
        g = RngStream(4).gen
        X, y, w = g.normal(size=(30, 4)), g.normal(size=30), g.exponential(size=30)
        W = np.diag(w)
        expected = np.linalg.solve(X.T @ W @ X, X.T @ W @ y)
        np.testing.assert_allclose(fit_weighted_mle("linear", X, y, w, solver="newton"), expected, atol=1e-8)

    def test_logistic_gd_approaches_newton(self):
        g = RngStream(5).gen
        X = g.normal(size=(200, 3))
        y = (g.random(200) < 1 / (1 + np.exp(-X @ [1.0, -0.5, 0.2]))).astype(float)
        ref = fit_weighted_mle("logistic", X, y, solver="newton", tol=1e-12)
        gd = fit_weighted_mle("logistic", X, y, tol=1e-14, max_passes=100000, lr=2.0)
        np.testing.assert_allclose(gd, ref, atol=1e-3)

    def test_single_row_with_opposing_pseudo_rows(self):
        data = ArmDataset(2, [[1, 0], [1, 0], [0, 1], [0, 1]], [1, 0, 1, 0])
        data.add([1.0, 0.0], 1)
        theta = fit_weighted_mle("logistic", data.X, data.y, max_passes=5000)
        assert np.all(np.isfinite(theta))
        assert 0 < ContextModel("logistic", theta).predict([1.0, 0.0]) < 1

    @settings(max_examples=25, deadline=None)
    @given(st.floats(1e-3, 1e3), st.integers(0, 1000))
    def test_weight_scale_invariance(self, c, seed):
        g = RngStream(seed).gen
        X, y, w = g.normal(size=(15, 3)), g.integers(0, 2, 15).astype(float), g.exponential(size=15)
        a = fit_weighted_mle("logistic", X, y, w)
        b = fit_weighted_mle("logistic", X, y, c * w)
        assert np.max(np.abs(a - b)) < 1e-3

    def test_divergence_reports_steps(self):
        X = np.array([[1e3], [2e3]])
        with pytest.raises(OptimizationError) as err:
            fit_weighted_mle("linear", X, [1.0, 2.0], lr=1e3, max_passes=10000)
        assert err.value.steps > 0

    @pytest.mark.parametrize("kw", [{"tol": 0.0}, {"weights": [-1.0, 1.0]}, {"weights": [0.0, 0.0]}])
    def test_bad_arguments(self, kw):
        with pytest.raises(ValueError):
            fit_weighted_mle("linear", [[1.0], [2.0]], [0.0, 1.0], **kw)

    def test_warm_start_converged_returns_immediately(self):
        X = np.array([[1.0], [1.0]])
        theta = fit_weighted_mle("linear", X, [0.0, 1.0], warm_start=[0.5])
        assert theta[0] == 0.5


class TestBootstrapSamples:
    def test_wb_symmetric_pseudo_rows_centered(self):
        pseudo = make_pseudo_examples(RngStream(1).gen.normal(size=(200, 3)), 3)
        data = ArmDataset(3, pseudo.X, pseudo.y)
        rng = RngStream(2)
        thetas = np.array([wb_contextual_sample(data, "logistic", None, rng) for _ in range(1000)])
        se = thetas.std(axis=0, ddof=1) / math.sqrt(len(thetas))
        assert np.all(np.abs(thetas.mean(axis=0)) < 3 * se)

    def test_wb_streams_differ(self):
        data = featureless([1, 0, 1])
        a = wb_contextual_sample(data, "linear", None, RngStream(1))
        b = wb_contextual_sample(data, "linear", None, RngStream(2))
        assert not np.array_equal(a, b)

    def test_wb_unit_weights_is_plain_mle(self, rng):
        g = RngStream(8).gen
        data = ArmDataset(2)
        for _ in range(10):
            data.add(g.normal(size=2), float(g.integers(0, 2)))
        a = wb_contextual_sample(data, "logistic", None, rng, unit_weights=True)
        b = fit_weighted_mle("logistic", data.X, data.y)
        np.testing.assert_array_equal(a, b)

    def test_npb_single_row(self, rng):
        data = ArmDataset(1)
        data.add([2.0], 1.0)
        a = npb_contextual_sample(data, "linear", None, rng, solver="newton")
        np.testing.assert_allclose(a, [0.5])

    def test_npb_multiplicity_mean(self):
        n, reps = 8, 20000
        counts = RngStream(3).gen.multinomial(n, np.full(n, 1 / n), size=reps)
        np.testing.assert_allclose(counts.mean(axis=0), 1.0, atol=3 * math.sqrt((1 - 1 / n) / reps) * 1.5)

    def test_featureless_wb_matches_beta(self):
        rewards = [1, 0, 0, 1, 1]
        data = featureless(rewards)
        rng = RngStream(4)
        v = np.array([wb_contextual_sample(data, "linear", None, rng, solver="newton")[0] for _ in range(10**4)])
        assert ks_statistic(v, beta_cdf(4, 3)) < 1.63 / math.sqrt(v.size)

    def test_featureless_npb_matches_binomial(self):
        data = featureless([1, 0, 0, 1, 1])
        rng = RngStream(5)
        v = np.array([npb_contextual_sample(data, "linear", None, rng, solver="newton")[0] for _ in range(10**4)])
        ref = npb_bernoulli_sample(ArmHistory.from_counts(3, 2), RngStream(6), 10**4)
        grid = lambda a: np.bincount(np.rint(a * 7).astype(int), minlength=8) / a.size  # noqa: E731
        assert total_variation(grid(v), grid(ref)) < 0.03


class TestPseudoExamples:
    def test_isotropic_basis(self):
        d, s = 3, 2.0
        contexts = np.vstack([s * np.eye(d), -s * np.eye(d)])
        pe = make_pseudo_examples(contexts, d)
        lam = math.sqrt(2 * s**2 / (2 * d - 1))
        pts = pe.X[: 2 * d]
        # each point is +-lambda e_i
        np.testing.assert_allclose(np.sort(np.abs(pts).max(axis=1)), lam, rtol=1e-12)
        assert np.all(np.count_nonzero(np.abs(pts) > 1e-12, axis=1) == 1)
        assert not pe.isotropic

    def test_count_and_balance(self):
        d = 5
        pe = make_pseudo_examples(RngStream(2).gen.normal(size=(100, d)), d)
        assert pe.X.shape == (4 * d, d)
        assert (pe.y == 1).sum() == 2 * d and (pe.y == 0).sum() == 2 * d

    def test_eigen_axes_reconstruct_covariance(self):
        C = RngStream(3).gen.normal(size=(500, 4)) @ np.diag([3.0, 1.0, 0.5, 2.0])
        pe = make_pseudo_examples(C, 4)
        axes = pe.X[:4]
        np.testing.assert_allclose(axes.T @ axes, np.cov(C, rowvar=False), atol=1e-10)

    @pytest.mark.parametrize("contexts", [np.ones((2, 4)), np.zeros((50, 4)), np.ones((50, 4))])
    def test_fallback(self, contexts):
        pe = make_pseudo_examples(contexts, 4, RngStream(1))
        assert pe.isotropic
        assert pe.X.shape == (16, 4)

    def test_symmetry_of_plain_fit(self):
        pe = make_pseudo_examples(RngStream(6).gen.normal(size=(100, 3)), 3)
        theta = fit_weighted_mle("logistic", pe.X, pe.y)
        np.testing.assert_allclose(ContextModel("logistic", theta).predict(pe.X), 0.5, atol=1e-12)


class TestLinearBayes:
    def test_fresh_scores_tie(self):
        states = [LinearBayesState(2) for _ in range(3)]
        x = np.array([0.6, 0.8])
        rng = RngStream(1)
        picks = [linucb_select(states, x, 1.0, rng) for _ in range(3000)]
        np.testing.assert_allclose(np.bincount(picks) / 3000, 1 / 3, atol=0.04)
        assert states[0].width(x) == pytest.approx(1.0)

    def test_zero_width_is_greedy(self, rng):
        states = [LinearBayesState(1) for _ in range(2)]
        states[1].update([1.0], 1.0)
        states[0].update([1.0], 0.2)
        assert all(linucb_select(states, np.array([1.0]), 0.0, rng) == 1 for _ in range(20))
        assert all(lints_select(states, np.array([1.0]), 0.0, rng) == 1 for _ in range(20))

    def test_linucb_dominant_arm(self, rng):
        pol = LinUCBPolicy(2, 2)
        picks = []
        for t in range(400):
            x = np.array([0.5, 0.2 * rng.gen.standard_normal()])
            a = pol.select(x, rng)
            pol.update(x, a, 1.0 if a == 0 else 0.0)
            picks.append(a)
        assert np.mean(np.array(picks[-200:]) == 0) > 0.95

    def test_scalar_sample(self):
        s = LinearBayesState(1)
        s.b[:] = 0.5
        v = np.array([s.sample(1.0, RngStream(2)) for _ in range(1)])
        rng = RngStream(3)
        v = np.array([s.sample(1.0, rng)[0] for _ in range(20000)])
        assert abs(v.mean() - 0.5) < 3 / math.sqrt(v.size)
        assert abs(v.var() - 1.0) < 0.05

    def test_sample_covariance(self):
        s = LinearBayesState(3)
        g = RngStream(4).gen
        for _ in range(10):
            s.update(g.normal(size=3), g.random())
        rng = RngStream(5)
        v = np.array([s.sample(1.5, rng) for _ in range(10**5)])
        target = 1.5**2 * np.linalg.inv(s.A)
        emp = np.cov(v, rowvar=False)
        assert np.linalg.norm(emp - target) / np.linalg.norm(target) < 0.05
        np.testing.assert_allclose(v.mean(axis=0), s.mean(), atol=5 * np.sqrt(np.diag(target).max() / 10**5))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.lists(st.floats(-10, 10), min_size=3, max_size=3), max_size=20), st.floats(0.1, 5))
    def test_positive_definite(self, rows, ridge):
        s = LinearBayesState(3, ridge)
        for r in rows:
            s.update(r, 1.0)
        assert np.linalg.eigvalsh(s.A).min() >= ridge * (1 - 1e-9)


class TestPolicies:
    @pytest.mark.parametrize("name", CONTEXTUAL_POLICY_NAMES + ("ucb", "ts"))
    def test_factory_and_one_round(self, name, rng):
        pol = make_contextual_policy(name, 3, 4, contexts=rng.gen.normal(size=(50, 4)), rng=rng)
        x = rng.gen.normal(size=4)
        a = pol.select(x, rng)
        assert 0 <= a < 3
        pol.update(x, a, 1)

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="valid names: eg-lin"):
            make_contextual_policy("thompson", 3, 4)
