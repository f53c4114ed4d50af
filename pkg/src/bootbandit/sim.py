"""Replicated experiment engine.

Replications are grouped in fixed-size blocks.  A block owns one
:class:`RngStream` derived from ``(master_seed, block_index, purpose)`` and
advances all of its replications in lockstep with vectorized policies, so
results are independent of how many blocks run concurrently and of the
order in which they finish.
"""
from __future__ import annotations

import logging
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dist import RngStream
from .env import BanditBatch, BanditInstance, ContextualDataset, RewardModel, random_instance, theorem1_instance
from .policy import POLICY_NAMES, ForcedExploration, forced_exploration_schedule, make_policy

logger = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "RegretTrace",
    "MABExperiment",
    "ContextualExperiment",
    "PolicySpec",
    "run_mab",
    "run_contextual",
    "aggregate",
    "loglog_slope",
    "per_step_reward",
    "run_mab_experiment",
    "run_contextual_experiment",
    "WORKERS_ENV",
]

WORKERS_ENV = "BOOTBANDIT_WORKERS"


class ConfigError(ValueError):
    """An experiment configuration is invalid."""


@dataclass
class RegretTrace:
    """Per-round series for a set of replications.

    ``values`` has shape ``(runs, T)``.  For bandit runs it holds cumulative
    regret; for contextual runs it holds the reward collected each round.
    """

    values: np.ndarray
    kind: str = "regret"
    arms: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))

    @property
    def runs(self) -> int:
        return self.values.shape[0]

    @property
    def horizon(self) -> int:
        return self.values.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    @property
    def stderr(self) -> np.ndarray:
        if self.runs < 2:
            return np.zeros(self.horizon)
        return self.values.std(axis=0, ddof=1) / np.sqrt(self.runs)

    def final(self) -> np.ndarray:
        return self.values[:, -1]

    def running_average(self) -> "RegretTrace":
        """Per-step reward ``sum_{s<=t} r_s / t`` of a reward trace."""
        t = np.arange(1, self.horizon + 1)
        return RegretTrace(np.cumsum(self.values, axis=1) / t, kind="per-step-reward")


def aggregate(traces: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise mean and standard error over equal-length traces.

    Accepts 1-d arrays, 2-d ``(runs, T)`` arrays or :class:`RegretTrace`
    objects; all rows are pooled.  The standard error is the sample standard
    deviation over ``sqrt(runs)`` (zero for a single trace).
    """
    rows = []
    for tr in traces:
        v = tr.values if isinstance(tr, RegretTrace) else np.asarray(tr, dtype=float)
        rows.append(np.atleast_2d(v))
    if not rows:
        raise ValueError("aggregate needs at least one trace")
    lengths = {r.shape[1] for r in rows}
    if len(lengths) != 1:
        raise ValueError(f"trace lengths differ: {sorted(lengths)}")
    pooled = RegretTrace(np.vstack(rows))
    return pooled.mean, pooled.stderr


def loglog_slope(trace, window: tuple[int, int]) -> float:
    """Least-squares slope of ``log R(t)`` against ``log t`` for ``t`` in ``window``.

    ``trace[t - 1]`` is the value at round ``t``.
    """
    trace = np.asarray(trace, dtype=float)
    lo, hi = int(window[0]), int(window[1])
    if lo < 1 or hi > trace.size or lo >= hi:
        raise ValueError(f"window {window} outside 1..{trace.size}")
    t = np.arange(lo, hi + 1, dtype=float)
    r = trace[lo - 1 : hi]
    if np.any(r <= 0):
        raise ValueError("regret must be positive on the fitting window")
    slope, _ = np.polyfit(np.log(t), np.log(r), 1)
    return float(slope)


def per_step_reward(rewards) -> float:
    """Average reward per round."""
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size == 0:
        raise ValueError("need at least one round")
    return float(rewards.mean())


# ---------------------------------------------------------------------------
# bandit runs


def run_mab(
    bandit: BanditInstance | BanditBatch,
    policy,
    horizon: int,
    rng: RngStream,
    *,
    realized: bool = False,
    record_arms: bool = False,
) -> RegretTrace:
    """Play ``policy`` against ``bandit`` for ``horizon`` rounds.

    Regret per round is ``optimal_mean - mean(chosen arm)`` (pseudo-regret);
    with ``realized=True`` the realized reward replaces the chosen arm's mean.
    Forced-exploration rounds of a :class:`ForcedExploration` wrapper count
    toward the horizon and are charged like any other round.
    """
    batch = bandit if isinstance(bandit, BanditBatch) else BanditBatch.replicate(bandit, policy.n_runs)
    if batch.n_runs != policy.n_runs or batch.n_arms != policy.n_arms:
        raise ConfigError("policy and bandit disagree on runs or arms")
    if horizon < 1:
        raise ConfigError("horizon must be positive")
    forced = getattr(policy, "forced_rounds", 0)
    if forced > horizon:
        raise ConfigError(f"forced exploration needs {forced} rounds but the horizon is {horizon}")
    R = batch.n_runs
    rows = np.arange(R)
    inc = np.empty((R, horizon))
    arms_log = np.empty((R, horizon), dtype=np.int32) if record_arms else None
    for t in range(horizon):
        arms = policy.select(rng)
        rewards = batch.sample(arms, rng)
        policy.update(arms, rewards, rng)
        if realized:
            inc[:, t] = batch.optimal - rewards
        else:
            inc[:, t] = batch.optimal - batch.means[rows, arms]
        if arms_log is not None:
            arms_log[:, t] = arms
    return RegretTrace(np.cumsum(inc, axis=1), kind="regret", arms=arms_log)


@dataclass
class PolicySpec:
    """A named policy and its hyperparameters."""

    name: str
    kind: str
    params: dict = field(default_factory=dict)

    @property
    def seed_key(self) -> int:
        return zlib.crc32(self.name.encode())


@dataclass
class MABExperiment:
    """Configuration of a replicated K-armed bandit experiment."""

    family: str = "bernoulli"
    n_arms: int = 10
    horizon: int = 10_000
    runs: int = 100
    master_seed: int = 0
    policies: list = field(default_factory=lambda: [PolicySpec("ts", "ts"), PolicySpec("npb", "npb"), PolicySpec("wb", "wb")])
    forced: str = "none"
    forced_m: int | None = None
    realized: bool = False
    block_size: int = 100
    known_arms: bool = True
    arm_means: tuple | None = None

    def validate(self) -> None:
        if self.horizon < 1:
            raise ConfigError("horizon: must be >= 1")
        if self.runs < 1:
            raise ConfigError("runs: must be >= 1")
        if self.block_size < 1:
            raise ConfigError("block_size: must be >= 1")
        if self.arm_means is not None:
            if self.family == "theorem1":
                raise ConfigError("means: the theorem1 instance is fixed")
            if len(self.arm_means) != self.n_arms:
                raise ConfigError("means: one mean per arm is required")
            if any(not 0.0 <= m <= 1.0 for m in self.arm_means):
                raise ConfigError("means: every mean must lie in [0, 1]")
        if self.family != "theorem1" and self.n_arms < 2:
            raise ConfigError("arms: must be >= 2")
        if not self.policies:
            raise ConfigError("policies: at least one policy is required")
        for spec in self.policies:
            if spec.kind not in POLICY_NAMES:
                raise ConfigError(f"policies: unknown policy {spec.kind!r}; valid names: {', '.join(POLICY_NAMES)}")
        if self.forced_pulls() * self.arms_count() > self.horizon:
            raise ConfigError("forced_exploration: K*m exceeds the horizon")

    def arms_count(self) -> int:
        return 2 if self.family == "theorem1" else self.n_arms

    def forced_pulls(self) -> int:
        if self.forced in ("none", "", None):
            return 0
        return forced_exploration_schedule(self.horizon, self.forced, self.forced_m)

    def blocks(self) -> list[tuple[int, int]]:
        """(block index, runs in block) pairs."""
        out, left, b = [], self.runs, 0
        while left > 0:
            n = min(self.block_size, left)
            out.append((b, n))
            left -= n
            b += 1
        return out


def _instances(cfg: MABExperiment, block: int, n: int) -> list[BanditInstance]:
    if cfg.family == "theorem1":
        inst = theorem1_instance()
        if not cfg.known_arms:
            inst = BanditInstance(inst.arms)
        return [inst] * n
    if cfg.arm_means is not None:
        inst = BanditInstance([RewardModel.of_family(cfg.family, m) for m in cfg.arm_means])
        return [inst] * n
    rng = RngStream(cfg.master_seed, (block, 0))
    return [random_instance(cfg.n_arms, cfg.family, rng) for _ in range(n)]


def _policy_family(cfg: MABExperiment) -> str:
    return "bernoulli" if cfg.family == "theorem1" else cfg.family


def _run_mab_block(cfg: MABExperiment, spec: PolicySpec, block: int, n: int) -> np.ndarray:
    batch = BanditBatch(_instances(cfg, block, n))
    pol = make_policy(
        spec.kind, batch.n_arms, n, family=_policy_family(cfg), known=batch.known or None, **spec.params
    )
    m = cfg.forced_pulls()
    if m:
        pol = ForcedExploration(pol, m)
    rng = RngStream(cfg.master_seed, (block, 1, spec.seed_key))
    return run_mab(batch, pol, cfg.horizon, rng, realized=cfg.realized).values


def _map_blocks(fn: Callable, jobs: list, workers: int | None) -> list:
    workers = workers if workers is not None else int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(fn, *j) for j in jobs]
        return [f.result() for f in futures]


def run_mab_experiment(cfg: MABExperiment, workers: int | None = None) -> dict[str, RegretTrace]:
    """Run every policy of ``cfg`` over all replications.

    All policies face the same sequence of random instances.  The result maps
    policy name to a trace whose rows are ordered by replication index.
    """
    cfg.validate()
    out = {}
    for spec in cfg.policies:
        logger.info("mab: %s on %s, %d runs x %d rounds", spec.name, cfg.family, cfg.runs, cfg.horizon)
        jobs = [(cfg, spec, b, n) for b, n in cfg.blocks()]
        parts = _map_blocks(_run_mab_block, jobs, workers)
        out[spec.name] = RegretTrace(np.vstack(parts), kind="regret")
    return out


# ---------------------------------------------------------------------------
# contextual runs


def run_contextual(
    dataset: ContextualDataset,
    policy,
    horizon: int,
    rng: RngStream,
    *,
    start: int = 0,
) -> np.ndarray:
    """Observe context, select, reward, update for ``horizon`` rounds.

    Rows are consumed cyclically from ``start``.  Returns the reward of each
    round.
    """
    rewards = np.empty(horizon)
    n = len(dataset)
    for t in range(horizon):
        i = (start + t) % n
        x = dataset.contexts[i]
        try:
            arm = policy.select(x, rng)
            r = int(dataset.labels[i] == arm)
            policy.update(x, arm, r)
        except Exception as exc:
            raise RuntimeError(f"round {t}: {exc}") from exc
        rewards[t] = r
    return rewards


@dataclass
class ContextualExperiment:
    """Configuration of a replicated one-vs-all contextual experiment."""

    dataset: ContextualDataset | None = None
    horizon: int = 5000
    runs: int = 5
    master_seed: int = 0
    policies: list = field(default_factory=list)
    pseudo_sample: int = 1000

    def validate(self) -> None:
        if self.dataset is None:
            raise ConfigError("dataset: a dataset is required")
        if self.horizon < 1:
            raise ConfigError("horizon: must be >= 1")
        if self.runs < 1:
            raise ConfigError("runs: must be >= 1")
        if not self.policies:
            raise ConfigError("policies: at least one policy is required")
        from .ctx import resolve_contextual_name

        for spec in self.policies:
            try:
                resolve_contextual_name(spec.kind)
            except ValueError as exc:
                raise ConfigError(f"policies: {exc}") from None


def _run_contextual_rep(cfg: ContextualExperiment, spec: PolicySpec, rep: int) -> np.ndarray:
    from .ctx import make_contextual_policy

    ds = cfg.dataset.shuffled(RngStream(cfg.master_seed, (rep, 0)))
    sample = ds.contexts[: min(cfg.pseudo_sample, len(ds))]
    pol = make_contextual_policy(
        spec.kind, ds.n_classes, ds.dim, contexts=sample, rng=RngStream(cfg.master_seed, (rep, 2)), **spec.params
    )
    rng = RngStream(cfg.master_seed, (rep, 1, spec.seed_key))
    return run_contextual(ds, pol, cfg.horizon, rng)


def run_contextual_experiment(cfg: ContextualExperiment, workers: int | None = None) -> dict[str, RegretTrace]:
    """Per-round reward traces for every policy; each replication reshuffles the rows."""
    cfg.validate()
    out = {}
    for spec in cfg.policies:
        logger.info("contextual: %s, %d runs x %d rounds", spec.name, cfg.runs, cfg.horizon)
        jobs = [(cfg, spec, r) for r in range(cfg.runs)]
        parts = _map_blocks(_run_contextual_rep, jobs, workers)
        out[spec.name] = RegretTrace(np.vstack(parts), kind="reward")
    return out
