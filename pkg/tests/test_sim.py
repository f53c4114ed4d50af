from __future__ import annotations

import numpy as np
import pytest

from bootbandit.dist import RngStream
from bootbandit.env import BanditInstance, ContextualDataset, RewardModel, make_separable_dataset
from bootbandit.policy import Policy, make_policy
from bootbandit.sim import (
    ConfigError,
    ContextualExperiment,
    MABExperiment,
    PolicySpec,
    RegretTrace,
    aggregate,
    loglog_slope,
    per_step_reward,
    run_contextual,
    run_contextual_experiment,
    run_mab,
    run_mab_experiment,
)


class FixedArm(Policy):
    """Always pulls one arm."""

    def __init__(self, n_arms, n_runs, arm):
        super().__init__(n_arms, n_runs)
        self.arm = arm

    def select(self, rng):
        return np.full(self.n_runs, self.arm)


def two_arm(mu=(0.7, 0.4)):
    return BanditInstance(tuple(RewardModel.bernoulli(m) for m in mu))


class TestRunMab:
    def test_optimal_arm_zero_regret(self, rng):
        tr = run_mab(two_arm(), FixedArm(2, 3, 0), 50, rng)
        assert np.all(tr.values == 0)

    def test_suboptimal_linear_regret(self, rng):
        tr = run_mab(two_arm(), FixedArm(2, 3, 1), 50, rng)
        np.testing.assert_allclose(tr.values, 0.3 * np.arange(1, 51)[None, :].repeat(3, 0), atol=1e-12)

    def test_monotone_and_accounting(self, rng):
        inst = two_arm((0.2, 0.5))
        pol = make_policy("wb", 2, 20)
        tr = run_mab(inst, pol, 300, rng, record_arms=True)
        assert np.all(np.diff(tr.values, axis=1) >= -1e-12)
        pulled = np.cumsum(inst.means[tr.arms], axis=1)
        t = np.arange(1, 301)
        np.testing.assert_allclose(tr.values + pulled, np.tile(t * inst.optimal_mean, (20, 1)), atol=1e-9)

    def test_forced_rounds_exceeding_horizon(self, rng):
        from bootbandit.policy import ForcedExploration

        with pytest.raises(ConfigError):
            run_mab(two_arm(), ForcedExploration(make_policy("npb", 2), 30), 50, rng)

    def test_realized_regret(self, rng):
        tr = run_mab(two_arm(), FixedArm(2, 1, 0), 200, rng, realized=True)
        assert set(np.round(np.diff(tr.values[0]), 12)) <= {0.7, -0.3}


class TestAggregate:
    def test_single(self):
        t = np.arange(1.0, 6.0)
        m, se = aggregate([t])
        np.testing.assert_array_equal(m, t)
        np.testing.assert_array_equal(se, 0)

    def test_mean(self):
        t = np.arange(1.0, 6.0)
        m, _ = aggregate([t, 3 * t])
        np.testing.assert_allclose(m, 2 * t)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            aggregate([np.ones(3), np.ones(4)])

    def test_stderr_halves(self):
        g = RngStream(1).gen
        a = RegretTrace(np.cumsum(g.random((400, 50)), axis=1)).stderr[-1]
        b = RegretTrace(np.cumsum(g.random((1600, 50)), axis=1)).stderr[-1]
        assert b / a == pytest.approx(0.5, rel=0.05)


class TestSlope:
    t = np.arange(1, 10001, dtype=float)

    @pytest.mark.parametrize("f,expected", [(lambda t: 3 * t, 1.0), (lambda t: 2 * np.sqrt(t), 0.5)])
    def test_power_laws(self, f, expected):
        assert loglog_slope(f(self.t), (100, 10000)) == pytest.approx(expected, abs=0.01)

    def test_log_growth(self):
        assert loglog_slope(5 * np.log(self.t), (1000, 10000)) < 0.2

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            loglog_slope(np.zeros(100), (10, 100))


class TestPerStepReward:
    def test_values(self):
        assert per_step_reward(np.ones(10)) == 1.0
        assert per_step_reward(np.tile([0, 1], 50)) == 0.5
        with pytest.raises(ValueError):
            per_step_reward([])


class _Oracle:
    def __init__(self, ds):
        self.lookup = {x.tobytes(): int(y) for x, y in zip(ds.contexts, ds.labels)}

    def select(self, x, rng):
        return self.lookup[x.tobytes()]

    def update(self, x, arm, r):
        pass


class _Uniform:
    def __init__(self, k):
        self.k = k

    def select(self, x, rng):
        return int(rng.gen.integers(0, self.k))

    def update(self, x, arm, r):
        pass


class TestRunContextual:
    ds = make_separable_dataset(300, 4, 3, RngStream(2))

    def test_oracle(self, rng):
        assert per_step_reward(run_contextual(self.ds, _Oracle(self.ds), 700, rng)) == 1.0

    def test_uniform(self, rng):
        n = 30000
        r = per_step_reward(run_contextual(self.ds, _Uniform(3), n, rng))
        assert abs(r - 1 / 3) < 4 * np.sqrt(2 / 9 / n)

    def test_replay(self):
        a = run_contextual(self.ds, _Uniform(3), 100, RngStream(5))
        b = run_contextual(self.ds, _Uniform(3), 100, RngStream(5))
        np.testing.assert_array_equal(a, b)

    def test_error_names_round(self, rng):
        class Broken(_Uniform):
            def update(self, x, arm, r):
                raise FloatingPointError("nan")

        with pytest.raises(RuntimeError, match="round 0"):
            run_contextual(self.ds, Broken(3), 10, rng)


class TestExperiments:
    def test_validation(self):
        with pytest.raises(ConfigError, match="horizon"):
            MABExperiment(horizon=0).validate()
        with pytest.raises(ConfigError, match="valid names"):
            MABExperiment(policies=[PolicySpec("x", "ucb")]).validate()
        with pytest.raises(ConfigError, match="forced"):
            MABExperiment(n_arms=2, horizon=100, forced="explicit", forced_m=60).validate()
        with pytest.raises(ConfigError, match="means"):
            MABExperiment(n_arms=2, arm_means=(0.5,)).validate()

    def test_replay_and_independence(self):
        cfg = MABExperiment(n_arms=3, horizon=200, runs=6, master_seed=9, block_size=4)
        a = run_mab_experiment(cfg)
        b = run_mab_experiment(cfg)
        for k in a:
            np.testing.assert_array_equal(a[k].values, b[k].values)
        v = a["wb"].values
        assert all(not np.array_equal(v[i], v[j]) for i in range(6) for j in range(i + 1, 6))

    def test_seed_changes_result(self):
        a = run_mab_experiment(MABExperiment(n_arms=3, horizon=100, runs=4, master_seed=1))
        b = run_mab_experiment(MABExperiment(n_arms=3, horizon=100, runs=4, master_seed=2))
        assert not np.array_equal(a["ts"].values, b["ts"].values)

    def test_fixed_means_and_forced(self):
        cfg = MABExperiment(
            n_arms=2, horizon=100, runs=3, arm_means=(0.5, 0.3), forced="explicit", forced_m=10,
            policies=[PolicySpec("npb", "npb")],
        )
        tr = run_mab_experiment(cfg)["npb"]
        # 10 forced pulls of arm 2 cost 0.2 each
        np.testing.assert_allclose(tr.values[:, 19], 2.0, atol=1e-12)

    @pytest.mark.parametrize("family", ["beta", "truncnorm", "triangular", "theorem1"])
    def test_families_run(self, family):
        tr = run_mab_experiment(MABExperiment(family=family, n_arms=4, horizon=50, runs=3))
        assert all(t.values.shape == (3, 50) for t in tr.values())

    def test_contextual_experiment(self):
        ds = make_separable_dataset(200, 4, 3, RngStream(1))
        cfg = ContextualExperiment(dataset=ds, horizon=300, runs=2, master_seed=4,
                                   policies=[PolicySpec("ucb", "ucb-lin"), PolicySpec("rnd", "random")])
        out = run_contextual_experiment(cfg)
        assert out["ucb"].values[:, -100:].mean() > out["rnd"].values[:, -100:].mean()
        again = run_contextual_experiment(cfg)
        np.testing.assert_array_equal(out["ucb"].values, again["ucb"].values)

    def test_contextual_unknown_policy(self):
        ds = ContextualDataset(np.eye(3), np.arange(3), 3)
        with pytest.raises(ConfigError, match="valid names"):
            ContextualExperiment(dataset=ds, policies=[PolicySpec("x", "greedy")]).validate()

    def test_workers_env_matches_serial(self, monkeypatch):
        cfg = MABExperiment(n_arms=3, horizon=60, runs=6, block_size=2, policies=[PolicySpec("wb", "wb")])
        serial = run_mab_experiment(cfg, workers=1)["wb"].values
        parallel = run_mab_experiment(cfg, workers=2)["wb"].values
        np.testing.assert_array_equal(serial, parallel)
