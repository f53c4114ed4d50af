"""Reward-generating environments.

Stochastic K-armed bandits over the bounded reward families used in the
regret experiments, the two-arm lower-bound instance, Gaussian-linear arms,
and one-vs-all contextual environments built from classification data.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import truncnorm

from .dist import InvalidParameterError, RngStream

__all__ = [
    "FAMILIES",
    "RewardModel",
    "BanditInstance",
    "BanditBatch",
    "ContextualDataset",
    "DatasetFormatError",
    "DatasetSchemaError",
    "sample_reward",
    "random_instance",
    "theorem1_instance",
    "contextual_step",
    "load_dataset",
    "make_separable_dataset",
]

FAMILIES = ("bernoulli", "truncnorm", "beta", "triangular")

# kind codes for vectorized sampling
_KIND_CODES = {
    "bernoulli": 0,
    "truncnorm": 1,
    "beta": 2,
    "triangular": 3,
    "deterministic": 4,
    "gaussian": 5,
}

TRUNCNORM_SIGMA = 1e-4


@dataclass(frozen=True)
class RewardModel:
    """Reward distribution of one arm.

    Use the constructors (:meth:`bernoulli`, :meth:`truncnorm`, ...) rather
    than building instances by hand; they validate parameters and fill in
    derived ones.
    """

    kind: str
    params: tuple = ()
    mean: float = 0.0

    @classmethod
    def bernoulli(cls, mu: float) -> "RewardModel":
        if not 0.0 <= mu <= 1.0:
            raise InvalidParameterError(f"Bernoulli mean must lie in [0, 1], got {mu}")
        return cls("bernoulli", (float(mu),), float(mu))

    @classmethod
    def truncnorm(cls, mu: float, sigma: float = TRUNCNORM_SIGMA) -> "RewardModel":
        """Normal(mu, sigma) truncated to [0, 1].

        ``mean`` holds the truncation-adjusted expectation, which is what
        regret is measured against.
        """
        if not 0.0 <= mu <= 1.0 or not sigma > 0:
            raise InvalidParameterError(f"invalid truncated normal ({mu}, {sigma})")
        a, b = (0.0 - mu) / sigma, (1.0 - mu) / sigma
        m = float(truncnorm.mean(a, b, loc=mu, scale=sigma))
        return cls("truncnorm", (float(mu), float(sigma)), m)

    @classmethod
    def beta(cls, mu: float) -> "RewardModel":
        """Beta(mu, 1 - mu), whose mean is mu."""
        if not 0.0 < mu < 1.0:
            raise InvalidParameterError(f"Beta arm mean must lie in (0, 1), got {mu}")
        return cls("beta", (float(mu), 1.0 - float(mu)), float(mu))

    @classmethod
    def triangular(cls, mu: float) -> "RewardModel":
        """Triangular on [0, 1] whose mode is chosen to match ``mu``.

        Only means in [1/3, 2/3] are reachable; the mode is clamped to
        [0, 1] and ``mean`` records the mean actually achieved.
        """
        if not 0.0 <= mu <= 1.0:
            raise InvalidParameterError(f"triangular mean must lie in [0, 1], got {mu}")
        c = min(max(3.0 * mu - 1.0, 0.0), 1.0)
        return cls("triangular", (c,), (1.0 + c) / 3.0)

    @classmethod
    def deterministic(cls, c: float) -> "RewardModel":
        return cls("deterministic", (float(c),), float(c))

    @classmethod
    def gaussian_linear(cls, theta, sigma: float = 1.0) -> "RewardModel":
        """Reward ``<x, theta> + N(0, sigma^2)``; ``mean`` is for ``x = 1``."""
        theta = tuple(float(v) for v in np.atleast_1d(theta))
        if sigma < 0:
            raise InvalidParameterError("noise sigma must be nonnegative")
        return cls("gaussian", (theta, float(sigma)), float(sum(theta)))

    @classmethod
    def of_family(cls, family: str, mu: float) -> "RewardModel":
        try:
            return getattr(cls, family)(mu)
        except AttributeError:
            raise InvalidParameterError(f"unknown reward family {family!r}") from None

    def expected_value(self, x=None) -> float:
        if self.kind == "gaussian" and x is not None:
            return float(np.dot(np.atleast_1d(x), self.params[0]))
        return self.mean

    @property
    def bounded(self) -> bool:
        return self.kind != "gaussian"

    def sample(self, rng: RngStream, x=None) -> float:
        return sample_reward(self, rng, x)


def sample_reward(model: RewardModel, rng: RngStream, x=None) -> float:
    """One reward draw from ``model``."""
    g = rng.gen
    kind, p = model.kind, model.params
    if kind == "bernoulli":
        return float(g.random() < p[0])
    if kind == "truncnorm":
        while True:
            r = g.normal(p[0], p[1])
            if 0.0 <= r <= 1.0:
                return float(r)
    if kind == "beta":
        return float(g.beta(p[0], p[1]))
    if kind == "triangular":
        return float(g.triangular(0.0, p[0], 1.0))
    if kind == "deterministic":
        return p[0]
    if kind == "gaussian":
        theta, sigma = p
        xv = np.ones(len(theta)) if x is None else np.atleast_1d(x)
        return float(np.dot(xv, theta) + sigma * g.standard_normal())
    raise InvalidParameterError(f"unknown reward kind {kind!r}")


@dataclass(frozen=True)
class BanditInstance:
    """A K-armed stochastic bandit.

    ``known`` maps arm indices to reward values the agent is told up front;
    policies built with ``known=instance.known`` never sample those arms.
    """

    arms: tuple
    known: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.arms) < 2:
            raise InvalidParameterError("a bandit needs at least two arms")

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def means(self) -> np.ndarray:
        return np.array([a.mean for a in self.arms])

    @property
    def optimal_mean(self) -> float:
        return float(self.means.max())


def random_instance(n_arms: int, family: str, rng: RngStream) -> BanditInstance:
    """Arms of one family with means drawn i.i.d. Uniform(0, 1)."""
    if n_arms < 2:
        raise InvalidParameterError("n_arms must be at least 2")
    mus = rng.gen.random(n_arms)
    # Beta arms need mu > 0; a draw of exactly 0.0 is redrawn
    while np.any(mus == 0.0):
        mus[mus == 0.0] = rng.gen.random(int(np.sum(mus == 0.0)))
    return BanditInstance(tuple(RewardModel.of_family(family, float(m)) for m in mus))


def theorem1_instance() -> BanditInstance:
    """Bernoulli(1/2) arm against a known deterministic 1/4 arm."""
    return BanditInstance(
        (RewardModel.bernoulli(0.5), RewardModel.deterministic(0.25)),
        known={1: 0.25},
    )


class BanditBatch:
    """R bandit instances with the same arm count, sampled in lockstep.

    The simulation engine advances all replications of a block together;
    this class turns ``(R,)`` arm choices into ``(R,)`` rewards.
    """

    def __init__(self, instances: Sequence[BanditInstance]):
        if not instances:
            raise ValueError("empty batch")
        k = instances[0].n_arms
        if any(inst.n_arms != k for inst in instances):
            raise ValueError("all instances in a batch need the same number of arms")
        self.instances = list(instances)
        self.n_runs, self.n_arms = len(instances), k
        self.means = np.array([inst.means for inst in instances])
        self.optimal = self.means.max(axis=1)
        self.known = dict(instances[0].known)
        self.kinds = np.empty((self.n_runs, k), dtype=np.int8)
        self.p = np.zeros((self.n_runs, k, 2))
        for r, inst in enumerate(instances):
            for j, arm in enumerate(inst.arms):
                self.kinds[r, j] = _KIND_CODES[arm.kind]
                if arm.kind == "gaussian":
                    if len(arm.params[0]) != 1:
                        raise InvalidParameterError("only 1-d Gaussian arms are usable without contexts")
                    self.p[r, j] = (arm.params[0][0], arm.params[1])
                else:
                    pr = arm.params + (0.0,) * (2 - len(arm.params))
                    self.p[r, j] = pr
        self._uniform_kind = int(self.kinds[0, 0]) if np.all(self.kinds == self.kinds[0, 0]) else None

    @classmethod
    def replicate(cls, instance: BanditInstance, n_runs: int) -> "BanditBatch":
        return cls([instance] * n_runs)

    def sample(self, arms: np.ndarray, rng: RngStream) -> np.ndarray:
        rows = np.arange(self.n_runs)
        params = self.p[rows, arms]
        if self._uniform_kind is not None:
            return _sample_kind(self._uniform_kind, params, rng)
        kinds = self.kinds[rows, arms]
        out = np.empty(self.n_runs)
        for code in np.unique(kinds):
            sel = kinds == code
            out[sel] = _sample_kind(int(code), params[sel], rng)
        return out


def _sample_kind(code: int, params: np.ndarray, rng: RngStream) -> np.ndarray:
    g = rng.gen
    n = params.shape[0]
    p0, p1 = params[:, 0], params[:, 1]
    if code == 0:
        return (g.random(n) < p0).astype(float)
    if code == 1:
        out = g.normal(p0, p1)
        bad = (out < 0.0) | (out > 1.0)
        while np.any(bad):
            out[bad] = g.normal(p0[bad], p1[bad])
            bad = (out < 0.0) | (out > 1.0)
        return out
    if code == 2:
        return g.beta(p0, p1)
    if code == 3:
        return _triangular01(p0, g)
    if code == 4:
        return p0.copy()
    if code == 5:
        return p0 + p1 * g.standard_normal(n)
    raise InvalidParameterError(f"unknown kind code {code}")


def _triangular01(c: np.ndarray, g: np.random.Generator) -> np.ndarray:
    # inverse CDF of the triangular law on [0, 1] with mode c
    u = g.random(c.shape[0])
    left = u < c
    out = np.empty_like(u)
    out[left] = np.sqrt(u[left] * c[left])
    out[~left] = 1.0 - np.sqrt((1.0 - u[~left]) * (1.0 - c[~left]))
    return out


# ---------------------------------------------------------------------------
# contextual environments


class DatasetFormatError(ValueError):
    """A dataset line could not be parsed."""


class DatasetSchemaError(ValueError):
    """A dataset parsed but has inconsistent shape."""


@dataclass(frozen=True, eq=False)
class ContextualDataset:
    """Rows of a multi-class dataset, each class being one arm."""

    contexts: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        if self.contexts.ndim != 2 or self.contexts.shape[0] != self.labels.shape[0]:
            raise DatasetSchemaError("contexts must be (n, d) with one label per row")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise DatasetSchemaError("labels out of range")

    @property
    def dim(self) -> int:
        return self.contexts.shape[1]

    def __len__(self) -> int:
        return self.contexts.shape[0]

    def row(self, t: int) -> tuple[np.ndarray, int]:
        """Context and label at round ``t``; rows are reused cyclically."""
        i = t % len(self)
        return self.contexts[i], int(self.labels[i])

    def shuffled(self, rng: RngStream) -> "ContextualDataset":
        perm = rng.gen.permutation(len(self))
        return ContextualDataset(self.contexts[perm], self.labels[perm], self.n_classes)


def contextual_step(dataset: ContextualDataset, t: int, chosen_arm: int) -> int:
    """Reward 1 iff the row's class equals the chosen arm."""
    if not 0 <= t < len(dataset):
        raise IndexError(f"round {t} outside dataset of length {len(dataset)}")
    if not 0 <= chosen_arm < dataset.n_classes:
        raise IndexError(f"arm {chosen_arm} outside 0..{dataset.n_classes - 1}")
    return int(dataset.labels[t] == chosen_arm)


def _parse_float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise DatasetFormatError(f"line {lineno}: cannot parse {tok!r} as a number") from None


def _read_dense(path: Path):
    rows, labels = [], []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if lineno == 1 and not rows:
                try:
                    [float(c) for c in rec]
                except ValueError:
                    continue  # header
            if len(rec) < 2:
                raise DatasetSchemaError(f"row at line {lineno} has no features")
            vals = [_parse_float(c, lineno) for c in rec]
            if rows and len(vals) - 1 != len(rows[0]):
                raise DatasetSchemaError(
                    f"row at line {lineno} has {len(vals) - 1} features, expected {len(rows[0])}"
                )
            lab = vals[-1]
            if lab != int(lab):
                raise DatasetFormatError(f"line {lineno}: label {lab} is not an integer")
            rows.append(vals[:-1])
            labels.append(int(lab))
    return np.array(rows, dtype=float), labels


def _read_sparse(path: Path, dim: int | None):
    entries, labels = [], []
    max_idx = -1
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks:
                continue
            lab = _parse_float(toks[0], lineno)
            if lab != int(lab):
                raise DatasetFormatError(f"line {lineno}: label {lab} is not an integer")
            row = {}
            for tok in toks[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise DatasetFormatError(f"line {lineno}: expected index:value, got {tok!r}")
                try:
                    i = int(idx)
                except ValueError:
                    raise DatasetFormatError(f"line {lineno}: bad feature index {idx!r}") from None
                if i < 0:
                    raise DatasetSchemaError(f"row at line {lineno} has negative feature index {i}")
                if dim is not None and i >= dim:
                    raise DatasetSchemaError(f"row at line {lineno} has index {i} >= dimension {dim}")
                row[i] = _parse_float(val, lineno)
                max_idx = max(max_idx, i)
            entries.append(row)
            labels.append(int(lab))
    d = dim if dim is not None else max_idx + 1
    X = np.zeros((len(entries), d))
    for r, row in enumerate(entries):
        for i, v in row.items():
            X[r, i] = v
    return X, labels


def load_dataset(
    path,
    fmt: str = "dense-csv",
    rng: RngStream | None = None,
    dim: int | None = None,
) -> ContextualDataset:
    """Read a classification dataset and shuffle its rows.

    Parameters
    ----------
    path : path-like
        Dense CSV (features then an integer label per row, optional header)
        or sparse ``label index:value ...`` lines with 0-based indices.
    fmt : {"dense-csv", "sparse"}
    rng : RngStream, optional
        Drives the row permutation; ``None`` keeps file order.
    dim : int, optional
        Feature dimension for the sparse format (inferred when omitted).

    Distinct labels are mapped to arms ``0..K-1`` in sorted order.
    """
    path = Path(path)
    if fmt in ("dense-csv", "csv", "dense"):
        X, labels = _read_dense(path)
    elif fmt in ("sparse", "sparse-index-value", "svmlight"):
        X, labels = _read_sparse(path, dim)
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")
    if not labels:
        raise DatasetSchemaError(f"{path} contains no rows")
    classes, y = np.unique(np.array(labels), return_inverse=True)
    ds = ContextualDataset(X, y.astype(np.int64), len(classes))
    return ds.shuffled(rng) if rng is not None else ds


def make_separable_dataset(
    n_rows: int, dim: int, n_classes: int, rng: RngStream, scale: float = 3.0, noise: float = 0.5
) -> ContextualDataset:
    """Synthetic one-vs-all separable data.

    Class ``k`` sits at ``scale * e_k`` with uniform noise in
    ``[-noise, noise]`` on every coordinate.  With ``noise < scale / n_classes``
    every class is separable from the rest by a hyperplane through the origin.
    """
    if n_classes > dim:
        raise ValueError("need dim >= n_classes")
    labels = rng.gen.integers(0, n_classes, n_rows)
    X = rng.gen.uniform(-noise, noise, (n_rows, dim))
    X[np.arange(n_rows), labels] += scale
    return ContextualDataset(X, labels.astype(np.int64), n_classes)
