"""Random sampling primitives and exact probability helpers.

All stochastic code in the package draws from an :class:`RngStream`, a thin
owner of a :class:`numpy.random.Generator`.  Streams for independent
replications are derived from a master seed and an index path through
:class:`numpy.random.SeedSequence`, so every experiment replays bit-exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import betainc, gammaln, logsumexp

__all__ = [
    "InvalidParameterError",
    "RngStream",
    "ExactProb",
    "sample_exponential",
    "sample_gamma",
    "sample_beta",
    "sample_binomial",
    "sample_gaussian",
    "binomial_pmf",
    "binomial_tail_exact",
    "kl_bernoulli",
    "ks_statistic",
    "beta_cdf",
]

_MASK64 = (1 << 64) - 1


class InvalidParameterError(ValueError):
    """A distribution parameter lies outside its domain."""


class RngStream:
    """Seeded random stream owned by a single replication.

    Parameters
    ----------
    seed : int
        64-bit unsigned seed.
    path : sequence of int, optional
        Derivation path below ``seed``; ``RngStream(s, (3,))`` is the stream
        of replication 3 under master seed ``s``.
    """

    def __init__(self, seed: int, path: Sequence[int] = ()) -> None:
        self.seed = int(seed) & _MASK64
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self.gen = np.random.Generator(np.random.PCG64(ss))

    @classmethod
    def from_master(cls, master_seed: int, *index: int) -> "RngStream":
        return cls(master_seed, index)

    def child(self, *index: int) -> "RngStream":
        """Independent stream one level below this one."""
        return RngStream(self.seed, self.path + tuple(index))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"


@dataclass(frozen=True)
class ExactProb:
    """A probability with its natural-log representation."""

    log_value: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value > -math.inf else 0.0

    def __float__(self) -> float:
        return self.value


def sample_exponential(rng: RngStream, size=None):
    """Exp(1) draw(s)."""
    return rng.gen.standard_exponential(size)


def sample_gamma(shape, rng: RngStream, size=None):
    """Gamma(shape, 1) draw(s).

    numpy uses Marsaglia-Tsang rejection for ``shape >= 1`` and the
    uniform-power boost for ``shape < 1``.
    """
    shape_arr = np.asarray(shape, dtype=float)
    if np.any(~(shape_arr > 0)):
        raise InvalidParameterError(f"gamma shape must be positive, got {shape}")
    return rng.gen.standard_gamma(shape, size)


def sample_beta(a, b, rng: RngStream, size=None):
    """Beta(a, b) draw(s) computed as ``Ga / (Ga + Gb)``."""
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any(~(a_arr > 0)) or np.any(~(b_arr > 0)):
        raise InvalidParameterError(f"beta parameters must be positive, got ({a}, {b})")
    ga = rng.gen.standard_gamma(a_arr, size)
    gb = rng.gen.standard_gamma(b_arr, size)
    return ga / (ga + gb)


def sample_binomial(n, p, rng: RngStream, size=None):
    """Bino(n, p) draw(s)."""
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0) | (p_arr > 1) | np.isnan(p_arr)):
        raise InvalidParameterError(f"binomial p must lie in [0, 1], got {p}")
    if np.any(np.asarray(n) < 0):
        raise InvalidParameterError(f"binomial n must be nonnegative, got {n}")
    return rng.gen.binomial(n, p, size)


def sample_gaussian(mean, stddev, rng: RngStream, size=None):
    """N(mean, stddev**2) draw(s); ``stddev == 0`` returns ``mean`` exactly."""
    sd = np.asarray(stddev, dtype=float)
    if np.any(sd < 0) or np.any(np.isnan(sd)):
        raise InvalidParameterError(f"stddev must be nonnegative, got {stddev}")
    return rng.gen.normal(mean, sd, size)


def _log_binom_pmf(n: int, p: float, i: np.ndarray) -> np.ndarray:
    # p strictly inside (0, 1)
    return (
        gammaln(n + 1)
        - gammaln(i + 1)
        - gammaln(n - i + 1)
        + i * math.log(p)
        + (n - i) * math.log1p(-p)
    )


def binomial_pmf(n: int, p: float) -> np.ndarray:
    """Exact PMF of Bino(n, p) on ``0..n``."""
    if n < 0:
        raise InvalidParameterError("n must be nonnegative")
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"p must lie in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        pmf = np.zeros(n + 1)
        pmf[0 if p == 0.0 else n] = 1.0
        return pmf
    return np.exp(_log_binom_pmf(n, p, np.arange(n + 1, dtype=float)))


def binomial_tail_exact(n: int, p: float, k: float) -> ExactProb:
    """P(X >= k) for X ~ Bino(n, p), summed in log space over ceil(k)..n."""
    if n < 0:
        raise InvalidParameterError("n must be nonnegative")
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"p must lie in [0, 1], got {p}")
    lo = max(math.ceil(k), 0)
    if lo > n:
        return ExactProb(-math.inf)
    if lo == 0:
        return ExactProb(0.0)
    if p == 0.0:
        return ExactProb(-math.inf)
    if p == 1.0:
        return ExactProb(0.0)
    terms = _log_binom_pmf(n, p, np.arange(lo, n + 1, dtype=float))
    return ExactProb(min(float(logsumexp(terms)), 0.0))


def kl_bernoulli(q: float, p: float) -> float:
    """KL divergence D(Ber(q) || Ber(p)) in nats."""
    if not (0.0 < q < 1.0 and 0.0 < p < 1.0):
        raise InvalidParameterError(f"q and p must lie strictly inside (0, 1), got q={q}, p={p}")
    d = q * math.log(q / p) + (1.0 - q) * math.log((1.0 - q) / (1.0 - p))
    return max(d, 0.0)


def ks_statistic(samples, cdf: Callable) -> float:
    """Sup-norm distance between the empirical CDF of ``samples`` and ``cdf``.

    ``samples`` need not be pre-sorted.  ``cdf`` is called once on the sorted
    array, so it should accept numpy arrays.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("ks_statistic needs at least one sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    return float(max(d_plus, d_minus, 0.0))


def beta_cdf(a: float, b: float) -> Callable:
    """CDF of Beta(a, b) via the regularized incomplete beta function."""
    return lambda x: betainc(a, b, np.clip(x, 0.0, 1.0))
