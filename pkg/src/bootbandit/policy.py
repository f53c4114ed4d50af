"""Multi-armed bandit policies.

Two layers live here:

* per-arm sampling operations on an :class:`ArmHistory` (non-parametric
  bootstrap, weighted bootstrap, Thompson sampling and friends), which are
  the readable reference forms; every one takes an optional ``size`` for
  drawing many samples at once;
* batched policies whose state has shape ``(n_runs, n_arms)`` so a block of
  replications advances in lockstep.  Their index draws follow the same laws
  as the per-arm operations; the test-suite checks this.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dist import InvalidParameterError, RngStream, sample_beta, sample_binomial

__all__ = [
    "make_sample_store",
    "BACKEND_ENV",
    "ArmHistory",
    "InvalidStateError",
    "RankDeficiencyError",
    "npb_bernoulli_sample",
    "npb_general_sample",
    "wb_bernoulli_sample",
    "wb_general_sample",
    "ts_bernoulli_sample",
    "binarize_reward",
    "wb_categorical_sample",
    "wb_gaussian_sample",
    "epsilon_schedule",
    "forced_exploration_schedule",
    "argmax_random_ties",
    "Policy",
    "ThompsonSampling",
    "NonparametricBootstrap",
    "WeightedBootstrap",
    "EpsilonGreedy",
    "ForcedExploration",
    "SampleStore",
    "make_policy",
    "POLICY_NAMES",
    "select_arm",
    "update",
]


BACKEND_ENV = "BOOTBANDIT_BACKEND"


class InvalidStateError(RuntimeError):
    """A sampler was asked to act on an empty history."""


class RankDeficiencyError(np.linalg.LinAlgError):
    """The design matrix does not have full column rank."""


@dataclass
class ArmHistory:
    """Observations of one arm plus Laplace pseudo-counts.

    ``positives``/``negatives`` count rewards equal to 1 and 0; ``samples``
    keeps every reward when not ``None`` (needed for non-binary rewards).
    """

    n: int = 0
    total: float = 0.0
    positives: int = 0
    negatives: int = 0
    samples: list | None = None
    pseudo_pos: int = 1
    pseudo_neg: int = 1

    @classmethod
    def from_counts(cls, positives: int, negatives: int, pseudo_pos: int = 1, pseudo_neg: int = 1):
        return cls(
            n=positives + negatives,
            total=float(positives),
            positives=positives,
            negatives=negatives,
            pseudo_pos=pseudo_pos,
            pseudo_neg=pseudo_neg,
        )

    @classmethod
    def from_samples(cls, samples, pseudo_pos: int = 1, pseudo_neg: int = 1):
        h = cls(samples=[], pseudo_pos=pseudo_pos, pseudo_neg=pseudo_neg)
        for r in samples:
            h.add(r)
        return h

    def add(self, reward: float) -> None:
        self.n += 1
        self.total += reward
        if reward == 1:
            self.positives += 1
        elif reward == 0:
            self.negatives += 1
        if self.samples is not None:
            self.samples.append(float(reward))

    @property
    def is_binary(self) -> bool:
        return self.positives + self.negatives == self.n

    def pool(self) -> np.ndarray:
        """Observed rewards together with the pseudo-examples."""
        if self.samples is not None:
            obs = np.asarray(self.samples, dtype=float)
        elif self.is_binary:
            obs = np.repeat([1.0, 0.0], [self.positives, self.negatives])
        else:
            raise InvalidStateError("non-binary history without retained samples")
        return np.concatenate([obs, np.ones(self.pseudo_pos), np.zeros(self.pseudo_neg)])


# ---------------------------------------------------------------------------
# per-arm sampling operations


def npb_bernoulli_sample(h: ArmHistory, rng: RngStream, size=None):
    """Bootstrap mean of a binary history: ``Bino(N, (a0 + a) / N) / N``."""
    N = h.n + h.pseudo_pos + h.pseudo_neg
    if N == 0:
        return 0.5 if size is None else np.full(size, 0.5)
    p = (h.pseudo_pos + h.positives) / N
    return sample_binomial(N, p, rng, size) / N


def npb_general_sample(h: ArmHistory, rng: RngStream, size=None):
    """Mean of a with-replacement resample of the history (pseudo-examples included)."""
    pool = h.pool()
    N = pool.size
    if N == 0:
        raise InvalidStateError("cannot resample an empty history")
    if size is None:
        return float(pool[rng.gen.integers(0, N, N)].mean())
    idx = rng.gen.integers(0, N, (int(np.prod(size)), N))
    return pool[idx].mean(axis=1).reshape(size)


def wb_bernoulli_sample(h: ArmHistory, rng: RngStream, size=None):
    """Exponentially weighted mean of a binary history.

    Summing the Exp(1) weights of the positive and negative examples gives
    two independent gammas, so the draw is computed as
    ``Ga(a + a0) / (Ga(a + a0) + Ga(b + b0))``.  With no positive (negative)
    mass the result is exactly 0 (1).
    """
    a = h.positives + h.pseudo_pos
    b = h.negatives + h.pseudo_neg
    if a == 0:
        return 0.0 if size is None else np.zeros(size)
    if b == 0:
        return 1.0 if size is None else np.ones(size)
    return sample_beta(a, b, rng, size)


def wb_general_sample(h: ArmHistory, rng: RngStream, size=None):
    """Weighted mean of the history under i.i.d. Exp(1) weights."""
    pool = h.pool()
    N = pool.size
    if N == 0:
        raise InvalidStateError("cannot reweight an empty history")
    if size is None:
        w = rng.gen.standard_exponential(N)
        return float(w @ pool / w.sum())
    w = rng.gen.standard_exponential((int(np.prod(size)), N))
    return (w @ pool / w.sum(axis=1)).reshape(size)


def ts_bernoulli_sample(h: ArmHistory, rng: RngStream, size=None):
    """Posterior draw under a Beta(pseudo_pos, pseudo_neg) prior."""
    if h.pseudo_pos < 1 or h.pseudo_neg < 1:
        raise InvalidParameterError("Thompson sampling needs a proper Beta prior (pseudo-counts >= 1)")
    return sample_beta(h.positives + h.pseudo_pos, h.negatives + h.pseudo_neg, rng, size)


def binarize_reward(r, rng: RngStream):
    """Coin flip with success probability ``r``; maps [0, 1] rewards to {0, 1}."""
    r_arr = np.asarray(r, dtype=float)
    if np.any((r_arr < 0) | (r_arr > 1) | np.isnan(r_arr)):
        raise ValueError(f"reward must lie in [0, 1], got {r}")
    out = rng.gen.random(r_arr.shape) < r_arr
    return int(out) if out.ndim == 0 else out.astype(float)


def wb_categorical_sample(counts, pseudo, rng: RngStream, size=None):
    """Exponentially weighted category frequencies; a Dirichlet(counts + pseudo) draw."""
    totals = np.asarray(counts, dtype=float) + np.asarray(pseudo, dtype=float)
    if totals.ndim != 1 or totals.size < 2:
        raise ValueError("need at least two categories")
    if np.any(totals < 0):
        raise InvalidParameterError("counts and pseudo-counts must be nonnegative")
    if not np.any(totals > 0):
        raise InvalidStateError("all categories are empty")
    shape = (totals.size,) if size is None else tuple(np.atleast_1d(size)) + (totals.size,)
    g = rng.gen.standard_gamma(np.broadcast_to(totals, shape))
    return g / g.sum(axis=-1, keepdims=True)


def wb_gaussian_sample(X, y, rng: RngStream, size=None):
    """Least squares on labels perturbed by additive N(0, 1) noise.

    The draw is ``(X'X)^{-1} X'(y + w)``, distributed ``N(theta_hat, (X'X)^{-1})``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if np.linalg.matrix_rank(X) < d:
        raise RankDeficiencyError(f"design matrix has rank < {d}")
    gram = X.T @ X
    if size is None:
        w = rng.gen.standard_normal(n)
        return np.linalg.solve(gram, X.T @ (y + w))
    w = rng.gen.standard_normal((int(np.prod(size)), n))
    thetas = np.linalg.solve(gram, X.T @ (y[None, :] + w).T).T
    return thetas.reshape(tuple(np.atleast_1d(size)) + (d,))


def epsilon_schedule(t, c: float = 50.0):
    """Exploration rate ``c / (c + t)``."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("round index must be nonnegative")
    return c / (c + t)


def forced_exploration_schedule(horizon: int, mode: str = "proof-derived", m: int | None = None) -> int:
    """Pulls per arm before bootstrapping starts.

    ``"theorem-text"`` evaluates ``ceil((16 log T / T)^(1/3))`` literally;
    ``"proof-derived"`` uses that quantity as the gap scale ``d`` and returns
    ``ceil(16 log T / d^2)``; ``"explicit"`` returns ``m``.
    """
    if mode == "explicit":
        if m is None or m < 0:
            raise ValueError("explicit mode needs a nonnegative m")
        return int(m)
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    gap = (16.0 * math.log(horizon) / horizon) ** (1.0 / 3.0)
    if mode == "theorem-text":
        return math.ceil(gap)
    if mode == "proof-derived":
        return math.ceil(16.0 * math.log(horizon) / gap**2)
    raise ValueError(f"unknown forced-exploration mode {mode!r}")


# ---------------------------------------------------------------------------
# batched policies


def argmax_random_ties(values: np.ndarray, rng: RngStream, prefer: np.ndarray | None = None) -> np.ndarray:
    """Row-wise argmax with ties broken uniformly at random.

    ``prefer`` is a boolean mask over columns; among tied maxima the
    preferred columns win whenever one of them is tied.
    """
    values = np.atleast_2d(values)
    cand = values == values.max(axis=1, keepdims=True)
    if prefer is not None:
        pc = cand & prefer
        cand = np.where(pc.any(axis=1, keepdims=True), pc, cand)
    if np.all(cand.sum(axis=1) == 1):
        return cand.argmax(axis=1)
    u = rng.gen.random(values.shape)
    u[~cand] = -1.0
    return u.argmax(axis=1)


class SampleStore:
    """Reward samples of every (run, arm) pair in one flat buffer.

    Segment ``s = run * n_arms + arm`` holds the arm's pseudo-examples
    followed by its observed rewards.  Keeping segments contiguous lets the
    per-round bootstrap of all arms of all runs run as a handful of
    vectorized passes.
    """

    def __init__(self, n_runs: int, n_arms: int, pseudo_pos: int = 1, pseudo_neg: int = 1):
        self.n_runs, self.n_arms = n_runs, n_arms
        n_seg = n_runs * n_arms
        base = np.concatenate([np.ones(pseudo_pos), np.zeros(pseudo_neg)])
        self.values = np.tile(base, n_seg)
        self.sizes = np.full(n_seg, base.size, dtype=np.int64)
        self.starts = np.arange(n_seg, dtype=np.int64) * base.size

    def append(self, arms: np.ndarray, rewards: np.ndarray) -> None:
        seg = np.arange(self.n_runs) * self.n_arms + arms
        ends = self.starts[seg] + self.sizes[seg]
        self.values = np.insert(self.values, ends, rewards)
        inc = np.zeros_like(self.sizes)
        inc[seg] = 1
        self.starts += np.cumsum(inc) - inc
        self.sizes += inc

    def segment(self, run: int, arm: int) -> np.ndarray:
        s = run * self.n_arms + arm
        return self.values[self.starts[s] : self.starts[s] + self.sizes[s]]

    def _segment_sums(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.sizes.size)
        nz = self.sizes > 0
        if nz.all():
            return np.add.reduceat(x, self.starts)
        if nz.any():
            out[nz] = np.add.reduceat(x, self.starts[nz])
        return out

    def weighted_means(self, rng: RngStream) -> np.ndarray:
        """One Exp(1)-weighted mean per segment, shape ``(n_runs, n_arms)``."""
        w = rng.gen.standard_exponential(self.values.size)
        num = self._segment_sums(w * self.values)
        den = self._segment_sums(w)
        out = np.divide(num, den, out=np.full(num.shape, 0.5), where=self.sizes > 0)
        return out.reshape(self.n_runs, self.n_arms)

    def resampled_means(self, rng: RngStream) -> np.ndarray:
        """One with-replacement resample mean per segment."""
        sizes_rep = np.repeat(self.sizes, self.sizes)
        starts_rep = np.repeat(self.starts, self.sizes)
        idx = starts_rep + (rng.gen.random(self.values.size) * sizes_rep).astype(np.int64)
        sums = self._segment_sums(self.values[idx])
        out = np.divide(sums, self.sizes, out=np.full(sums.shape, 0.5), where=self.sizes > 0)
        return out.reshape(self.n_runs, self.n_arms)


def make_sample_store(n_runs: int, n_arms: int, pseudo_pos: int = 1, pseudo_neg: int = 1, backend: str | None = None):
    """Sample store for general-reward policies.

    ``backend`` is ``"numba"`` (compiled kernels, the default when numba is
    installed) or ``"numpy"``.  The two draw different random streams, so
    results replay exactly only under the same backend.
    """
    from ._kernels import HAVE_NUMBA, PaddedSampleStore

    backend = backend or os.environ.get(BACKEND_ENV) or ("numba" if HAVE_NUMBA else "numpy")
    if backend == "numba":
        return PaddedSampleStore(n_runs, n_arms, pseudo_pos, pseudo_neg)
    if backend == "numpy":
        return SampleStore(n_runs, n_arms, pseudo_pos, pseudo_neg)
    raise ValueError(f"unknown sample-store backend {backend!r}")


class Policy:
    """Base class for batched K-armed policies.

    Subclasses implement :meth:`indices`, returning one score per
    (run, arm); :meth:`select` takes the argmax.  Arms listed in ``known``
    score their known value and lose ties against sampled arms.
    """

    name = "policy"

    def __init__(
        self,
        n_arms: int,
        n_runs: int = 1,
        *,
        pseudo_pos: int = 1,
        pseudo_neg: int = 1,
        known: Mapping[int, float] | None = None,
    ):
        if n_arms < 2:
            raise ValueError("need at least two arms")
        if pseudo_pos < 0 or pseudo_neg < 0:
            raise InvalidParameterError("pseudo-counts must be nonnegative")
        self.n_arms, self.n_runs = n_arms, n_runs
        self.pseudo_pos, self.pseudo_neg = pseudo_pos, pseudo_neg
        self.known = dict(known or {})
        self.counts = np.zeros((n_runs, n_arms), dtype=np.int64)
        self.successes = np.zeros((n_runs, n_arms))
        self.totals = np.zeros((n_runs, n_arms))
        self.rounds = 0
        self._rows = np.arange(n_runs)
        self._free = np.array([j not in self.known for j in range(n_arms)])

    def indices(self, rng: RngStream) -> np.ndarray:
        raise NotImplementedError

    def _with_known(self, vals: np.ndarray) -> np.ndarray:
        for j, v in self.known.items():
            vals[:, j] = v
        return vals

    def select(self, rng: RngStream) -> np.ndarray:
        vals = self._with_known(self.indices(rng))
        return argmax_random_ties(vals, rng, self._free if self.known else None)

    def update(self, arms: np.ndarray, rewards: np.ndarray, rng: RngStream | None = None) -> None:
        arms = np.asarray(arms)
        rewards = np.asarray(rewards, dtype=float)
        self.counts[self._rows, arms] += 1
        self.totals[self._rows, arms] += rewards
        self.successes[self._rows, arms] += self._success_increment(rewards, rng)
        self.rounds += 1

    def _success_increment(self, rewards, rng):
        return rewards

    def history(self, run: int, arm: int) -> ArmHistory:
        n = int(self.counts[run, arm])
        pos = int(round(self.successes[run, arm]))
        return ArmHistory(
            n=n,
            total=float(self.totals[run, arm]),
            positives=pos,
            negatives=n - pos,
            pseudo_pos=self.pseudo_pos,
            pseudo_neg=self.pseudo_neg,
        )


def _require_binary(rewards: np.ndarray, name: str) -> None:
    if not np.all((rewards == 0.0) | (rewards == 1.0)):
        raise ValueError(f"{name} in bernoulli mode needs rewards in {{0, 1}}; use mode='general'")


class ThompsonSampling(Policy):
    """Beta-Bernoulli Thompson sampling.

    Rewards in [0, 1] are turned into binary pseudo-rewards by a coin flip
    before the posterior update (a no-op for rewards already in {0, 1}).
    """

    name = "ts"

    def __init__(self, n_arms, n_runs=1, *, binarize: bool = True, **kw):
        super().__init__(n_arms, n_runs, **kw)
        if self.pseudo_pos < 1 or self.pseudo_neg < 1:
            raise InvalidParameterError("Thompson sampling needs pseudo-counts >= 1")
        self.binarize = binarize

    def indices(self, rng):
        a = self.successes[:, self._free] + self.pseudo_pos
        b = self.counts[:, self._free] - self.successes[:, self._free] + self.pseudo_neg
        out = np.empty((self.n_runs, self.n_arms))
        out[:, self._free] = sample_beta(a, b, rng)
        return out

    def _success_increment(self, rewards, rng):
        if not self.binarize:
            _require_binary(rewards, "ThompsonSampling")
            return rewards
        if rng is None:
            raise ValueError("binarized Thompson sampling needs an RngStream in update()")
        return binarize_reward(rewards, rng)


class NonparametricBootstrap(Policy):
    """Resample-with-replacement bootstrap (NPB).

    ``mode="bernoulli"`` draws the closed-form binomial law from counts;
    ``mode="general"`` resamples the stored rewards.
    """

    name = "npb"

    def __init__(self, n_arms, n_runs=1, *, mode: str = "bernoulli", backend: str | None = None, **kw):
        super().__init__(n_arms, n_runs, **kw)
        if mode not in ("bernoulli", "general"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.store = make_sample_store(n_runs, n_arms, self.pseudo_pos, self.pseudo_neg, backend) if mode == "general" else None

    def indices(self, rng):
        if self.store is not None:
            return self.store.resampled_means(rng)
        N = self.counts[:, self._free] + self.pseudo_pos + self.pseudo_neg
        Nf = np.maximum(N, 1)
        p = np.where(N > 0, (self.successes[:, self._free] + self.pseudo_pos) / Nf, 0.5)
        z = rng.gen.binomial(N, p)
        out = np.empty((self.n_runs, self.n_arms))
        out[:, self._free] = np.where(N > 0, z / Nf, 0.5)
        return out

    def update(self, arms, rewards, rng=None):
        rewards = np.asarray(rewards, dtype=float)
        if self.store is None:
            _require_binary(rewards[self._free[np.asarray(arms)]], "NonparametricBootstrap")
        else:
            self.store.append(np.asarray(arms), rewards)
        super().update(arms, rewards, rng)


class WeightedBootstrap(Policy):
    """Exp(1)-weighted likelihood bootstrap (WB).

    ``mode="bernoulli"`` uses the gamma-ratio form on counts;
    ``mode="general"`` draws one weight per stored reward.
    """

    name = "wb"

    def __init__(self, n_arms, n_runs=1, *, mode: str = "bernoulli", backend: str | None = None, **kw):
        super().__init__(n_arms, n_runs, **kw)
        if mode not in ("bernoulli", "general"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.store = make_sample_store(n_runs, n_arms, self.pseudo_pos, self.pseudo_neg, backend) if mode == "general" else None

    def indices(self, rng):
        if self.store is not None:
            return self.store.weighted_means(rng)
        a = self.successes[:, self._free] + self.pseudo_pos
        b = self.counts[:, self._free] - self.successes[:, self._free] + self.pseudo_neg
        ga = rng.gen.standard_gamma(a)
        gb = rng.gen.standard_gamma(b)
        s = ga + gb
        vals = np.divide(ga, s, out=np.zeros_like(ga), where=s > 0)
        vals[(a > 0) & (b == 0)] = 1.0
        out = np.empty((self.n_runs, self.n_arms))
        out[:, self._free] = vals
        return out

    def update(self, arms, rewards, rng=None):
        rewards = np.asarray(rewards, dtype=float)
        if self.store is None:
            _require_binary(rewards[self._free[np.asarray(arms)]], "WeightedBootstrap")
        else:
            self.store.append(np.asarray(arms), rewards)
        super().update(arms, rewards, rng)


class EpsilonGreedy(Policy):
    """Uniform exploration with probability ``c / (c + t)``, else greedy.

    The greedy step ranks arms by Laplace-smoothed means
    ``(sum + a0) / (n + a0 + b0)``.
    """

    name = "eg"

    def __init__(self, n_arms, n_runs=1, *, schedule_c: float = 50.0, epsilon=None, **kw):
        super().__init__(n_arms, n_runs, **kw)
        self.schedule_c = schedule_c
        self.epsilon = epsilon

    def current_epsilon(self) -> float:
        if self.epsilon is not None:
            return float(self.epsilon(self.rounds + 1) if callable(self.epsilon) else self.epsilon)
        return float(epsilon_schedule(self.rounds + 1, self.schedule_c))

    def indices(self, rng):
        N = self.counts + self.pseudo_pos + self.pseudo_neg
        return np.divide(self.totals + self.pseudo_pos, N, out=np.full(N.shape, 0.5), where=N > 0)

    def select(self, rng):
        greedy = super().select(rng)
        eps = self.current_epsilon()
        explore = rng.gen.random(self.n_runs) < eps
        if np.any(explore):
            greedy[explore] = rng.gen.integers(0, self.n_arms, int(explore.sum()))
        return greedy


class ForcedExploration:
    """Pull every arm ``m`` times round-robin, then defer to ``policy``."""

    def __init__(self, policy: Policy, m: int):
        if m < 0:
            raise ValueError("m must be nonnegative")
        self.policy, self.m = policy, int(m)
        self.rounds = 0

    @property
    def name(self) -> str:
        return f"{self.policy.name}+fe{self.m}"

    @property
    def n_arms(self):
        return self.policy.n_arms

    @property
    def n_runs(self):
        return self.policy.n_runs

    @property
    def forced_rounds(self) -> int:
        return self.m * self.policy.n_arms

    def select(self, rng):
        if self.rounds < self.forced_rounds:
            return np.full(self.policy.n_runs, self.rounds % self.policy.n_arms)
        return self.policy.select(rng)

    def update(self, arms, rewards, rng=None):
        self.policy.update(arms, rewards, rng)
        self.rounds += 1

    def history(self, run, arm):
        return self.policy.history(run, arm)


POLICY_NAMES = ("ts", "npb", "wb", "eg")


def make_policy(
    kind: str,
    n_arms: int,
    n_runs: int = 1,
    *,
    family: str = "bernoulli",
    known: Mapping[int, float] | None = None,
    **hyper,
) -> Policy:
    """Build a batched policy by name.

    NPB and WB pick the count-based form for Bernoulli rewards and the
    sample-based form otherwise, unless ``mode`` is given explicitly.
    """
    kind = kind.lower()
    if kind in ("npb", "wb"):
        hyper.setdefault("mode", "bernoulli" if family == "bernoulli" else "general")
    cls = {
        "ts": ThompsonSampling,
        "npb": NonparametricBootstrap,
        "wb": WeightedBootstrap,
        "eg": EpsilonGreedy,
    }.get(kind)
    if cls is None:
        raise ValueError(f"unknown policy {kind!r}; valid names: {', '.join(POLICY_NAMES)}")
    return cls(n_arms, n_runs, known=known, **hyper)


def select_arm(policy: Policy, rng: RngStream) -> int:
    """Arm chosen by a single-run policy."""
    if policy.n_runs != 1:
        raise ValueError("select_arm works on single-run policies; call policy.select for batches")
    return int(policy.select(rng)[0])


def update(policy: Policy, arm: int, reward: float, rng: RngStream | None = None) -> None:
    """Record one observation on a single-run policy."""
    policy.update(np.array([arm]), np.array([reward], dtype=float), rng)
