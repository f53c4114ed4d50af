"""Exact numeric checks of the lemmas behind the NPB lower bound.

Every check returns a :class:`LemmaReport` listing each grid point with the
computed quantity, the bound it is compared against and whether the bound
holds.  Points outside a lemma's hypothesis are kept in the report, marked
as skipped, so a grid is never truncated silently.

The only stochastic routine is :func:`bad_history_probe`, which simulates
the two-arm instance (Bernoulli(1/2) against a known deterministic 1/4) to
look at the mechanism that makes NPB with a single pseudo-count pair fail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .dist import InvalidParameterError, RngStream, binomial_tail_exact, kl_bernoulli

__all__ = [
    "LemmaPoint",
    "LemmaReport",
    "check_tail_bound",
    "pull_probability",
    "check_pull_probability",
    "truncated_geometric_expectation",
    "truncated_geometric_bruteforce",
    "check_truncated_geometric",
    "ProbeResult",
    "bad_history_probe",
    "default_tail_grid",
    "run_default_checks",
]


@dataclass
class LemmaPoint:
    params: dict
    computed: float
    bound: float
    satisfied: bool | None  # None marks a skipped point
    note: str = ""

    def to_text(self) -> str:
        ps = " ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.params.items())
        if self.satisfied is None:
            return f"{ps} skipped: {self.note}"
        status = "pass" if self.satisfied else "FAIL"
        return f"{ps} computed={self.computed:.12g} bound={self.bound:.12g} {status}"


@dataclass
class LemmaReport:
    """Per-point outcome of one lemma check."""

    lemma: str
    points: list = field(default_factory=list)

    @property
    def checked(self) -> list:
        return [p for p in self.points if p.satisfied is not None]

    @property
    def skipped(self) -> list:
        return [p for p in self.points if p.satisfied is None]

    @property
    def passed(self) -> bool:
        """All checked points satisfied, and at least one point checked."""
        c = self.checked
        return bool(c) and all(p.satisfied for p in c)

    def to_text(self) -> str:
        head = (
            f"# {self.lemma}: {'PASS' if self.passed else 'FAIL'} "
            f"({len(self.checked)} checked, {len(self.skipped)} skipped)"
        )
        return "\n".join([head] + [f"{self.lemma} {p.to_text()}" for p in self.points]) + "\n"


def _holds(lhs: float, rhs: float, strict: bool, invert: bool) -> bool:
    ok = lhs < rhs if strict else lhs <= rhs
    return not ok if invert else ok


def default_tail_grid() -> list[tuple[int, float, int]]:
    """n in 5..200, p in {0.05, ..., 0.5}, k = ceil(0.7 n)."""
    ps = [round(0.05 * i, 2) for i in range(1, 11)]
    return [(n, p, math.ceil(0.7 * n)) for n in range(5, 201) for p in ps]


def check_tail_bound(grid: Iterable[tuple[int, float, float]], *, invert_bounds: bool = False) -> LemmaReport:
    """Exact ``P(Bino(n, p) >= k)`` against ``exp(-n D(k/n || p))``.

    The bound's hypothesis is ``np <= k < n``; the boundary ``k = np`` is
    admitted because there the divergence is 0 and the bound is 1.
    """
    rep = LemmaReport("tail-bound")
    for n, p, k in grid:
        params = {"n": n, "p": p, "k": k}
        if not (n * p <= k < n) or not 0 < p < 1:
            rep.points.append(LemmaPoint(params, math.nan, math.nan, None, "requires np <= k < n"))
            continue
        exact = binomial_tail_exact(n, p, k)
        log_bound = -n * kl_bernoulli(k / n, p) if k > 0 else 0.0
        ok = _holds(exact.log_value, log_bound + 1e-12, False, invert_bounds)
        rep.points.append(LemmaPoint(params, exact.value, math.exp(log_bound), ok))
    return rep


def pull_probability(alpha: int, beta: int) -> float:
    """Probability that NPB(1, 1) with ``alpha`` successes and ``beta`` failures samples at least 1/4.

    With ``N = alpha + beta`` the sample is ``Bino(N + 2, (alpha + 1)/(N + 2)) / (N + 2)``.
    """
    n = alpha + beta + 2
    return binomial_tail_exact(n, (alpha + 1) / n, n / 4).value


def check_pull_probability(m_range: Iterable[int], *, invert_bounds: bool = False) -> LemmaReport:
    """Strict bound ``P(1, m+1) < exp(-m log(m) / 20)`` for ``m >= 15``."""
    rep = LemmaReport("pull-probability")
    for m in m_range:
        m = int(m)
        params = {"m": m}
        if m < 15:
            rep.points.append(LemmaPoint(params, math.nan, math.nan, None, "requires m >= 15"))
            continue
        n = m + 2
        exact = binomial_tail_exact(n, 1.0 / n, n / 4)
        log_bound = -m * math.log(m) / 20.0
        ok = _holds(exact.log_value, log_bound, True, invert_bounds)
        rep.points.append(LemmaPoint(params, exact.value, math.exp(log_bound), ok))
    return rep


def _check_geometric_args(p: float, l: int) -> None:
    if not 0.0 < p < 1.0:
        raise InvalidParameterError(f"p must lie strictly inside (0, 1), got {p}")
    if int(l) != l or l < 1:
        raise InvalidParameterError(f"l must be a positive integer, got {l}")


def truncated_geometric_expectation(p: float, l: int) -> float:
    """``E[min(G, l)]`` for ``G`` the number of failures before the first success.

    Closed form ``(1/p - 1)(1 - (1 - p)^l)``.
    """
    _check_geometric_args(p, l)
    return (1.0 / p - 1.0) * -math.expm1(l * math.log1p(-p))


def truncated_geometric_bruteforce(p: float, l: int) -> float:
    """``sum_{i<l} i p (1-p)^i + l (1-p)^l`` with compensated summation."""
    _check_geometric_args(p, l)
    q = 1.0 - p
    terms = [i * p * q**i for i in range(l)]
    terms.append(l * q**l)
    return math.fsum(terms)


def check_truncated_geometric(
    ps: Iterable[float] | None = None,
    ls: Iterable[int] | None = None,
    *,
    atol: float = 1e-12,
    invert_bounds: bool = False,
) -> tuple[LemmaReport, LemmaReport]:
    """Closed form vs brute force, and the lower bound ``E >= min(1/p - 1, l (1-p)) / 2``.

    Defaults to ``p`` in {0.01, ..., 0.99} and ``l`` in 1..100.
    """
    ps = [round(0.01 * i, 2) for i in range(1, 100)] if ps is None else list(ps)
    ls = list(range(1, 101)) if ls is None else list(ls)
    exact_rep = LemmaReport("truncgeo-closed-form")
    lower_rep = LemmaReport("truncgeo-lower-bound")
    for p in ps:
        for l in ls:
            params = {"p": p, "l": l}
            closed = truncated_geometric_expectation(p, l)
            brute = truncated_geometric_bruteforce(p, l)
            err = abs(closed - brute)
            exact_rep.points.append(LemmaPoint(params, err, atol, _holds(err, atol, False, invert_bounds)))
            lower = 0.5 * min(1.0 / p - 1.0, l * (1.0 - p))
            lower_rep.points.append(LemmaPoint(params, closed, lower, _holds(lower, closed, False, invert_bounds)))
    return exact_rep, lower_rep


@dataclass
class ProbeResult:
    """Monte-Carlo statistics of the bad-history mechanism."""

    m: int
    horizon: int
    runs: int
    event_freq: float
    event_se: float
    event_expected: float
    incomplete: int
    pull_prob: float
    run_length_mean: float
    run_length_se: float
    run_length_expected: float
    conditional_runs: int

    def event_z(self) -> float:
        se = self.event_se if self.event_se > 0 else math.sqrt(self.event_expected * (1 - self.event_expected) / self.runs)
        return 0.0 if se == 0 else (self.event_freq - self.event_expected) / se

    def run_length_z(self) -> float:
        if self.run_length_se == 0:
            return 0.0 if self.run_length_mean == self.run_length_expected else math.inf
        return (self.run_length_mean - self.run_length_expected) / self.run_length_se


def _npb_pull(s: np.ndarray, f: np.ndarray, rng: RngStream) -> np.ndarray:
    n = s + f + 2
    draw = rng.gen.binomial(n, (s + 1) / n)
    # arm 1 is pulled iff its sample is at least 1/4, ties included
    return 4 * draw >= n


def bad_history_probe(m: int, horizon: int, runs: int, rng: RngStream) -> ProbeResult:
    """Simulate NPB(1, 1) on the two-arm instance.

    Two simulations share the stream:

    * Unconditioned runs give the frequency of the event "the first ``m``
      arm-1 rewards are all 0", to be compared with ``2**-m``.  Runs that
      never reach ``m`` arm-1 pulls count as non-events and are reported in
      ``incomplete``.
    * Runs with the first ``m`` arm-1 rewards forced to 0 give the number of
      consecutive arm-2 pulls after the ``m``-th arm-1 pull (round ``tau``)
      before arm 1 is pulled again.  Arm 1 is re-pulled each round with
      probability ``P(1, m+1)`` independently, so the prediction is the mean
      over runs of the truncated-geometric expectation with ``l = T - tau``.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    if runs < 1:
        raise ValueError("runs must be positive")
    if horizon <= 2 * m:
        raise ValueError("horizon must exceed 2 m")
    expected = 2.0**-m

    # (a) unconditioned event frequency
    s = np.zeros(runs, dtype=np.int64)
    f = np.zeros(runs, dtype=np.int64)
    if m == 0:
        event = np.ones(runs, dtype=bool)
        incomplete = 0
    else:
        alive = np.ones(runs, dtype=bool)  # all arm-1 rewards so far were 0
        for _ in range(horizon):
            open_ = (s + f) < m
            if not open_.any():
                break
            pull = _npb_pull(s, f, rng) & open_
            r = rng.gen.random(runs) < 0.5
            s += pull & r
            f += pull & ~r
            alive &= ~(pull & r)
        reached = (s + f) >= m
        event = alive & reached
        incomplete = int((~reached & alive).sum())
    freq = float(event.mean())
    se = math.sqrt(freq * (1 - freq) / runs)

    # (b) conditional run length
    p_pull = pull_probability(0, m)
    f = np.zeros(runs, dtype=np.int64)
    s = np.zeros(runs, dtype=np.int64)
    tau = np.full(runs, -1, dtype=np.int64)
    length = np.zeros(runs, dtype=np.int64)
    done = np.zeros(runs, dtype=bool)
    if m == 0:
        tau[:] = 0
    for t in range(1, horizon + 1):
        active = ~done
        if not active.any():
            break
        pull = _npb_pull(s, f, rng) & active
        waiting = tau < 0
        # bad-history phase: forced zero rewards
        fp = pull & waiting
        f += fp
        tau[fp & (f == m)] = t
        # run phase: count arm-2 rounds until arm 1 comes back
        running = active & ~waiting
        done |= running & pull
        length += running & ~pull
    reached = tau >= 0
    lens = length[reached]
    n_cond = int(reached.sum())
    if n_cond == 0:
        raise RuntimeError("no run completed the bad history within the horizon")
    ls = horizon - tau[reached]
    pred = np.array([truncated_geometric_expectation(p_pull, int(l)) if l >= 1 else 0.0 for l in ls])
    mean = float(lens.mean())
    lse = float(lens.std(ddof=1) / math.sqrt(n_cond)) if n_cond > 1 else 0.0
    return ProbeResult(
        m=m,
        horizon=horizon,
        runs=runs,
        event_freq=freq,
        event_se=se,
        event_expected=expected,
        incomplete=incomplete,
        pull_prob=p_pull,
        run_length_mean=mean,
        run_length_se=lse,
        run_length_expected=float(pred.mean()),
        conditional_runs=n_cond,
    )


def run_default_checks(*, invert_bounds: bool = False) -> list[LemmaReport]:
    """Tail bound, pull probability and truncated-geometric checks on their default grids."""
    reports = [
        check_tail_bound(default_tail_grid(), invert_bounds=invert_bounds),
        check_pull_probability(range(15, 201), invert_bounds=invert_bounds),
    ]
    reports.extend(check_truncated_geometric(invert_bounds=invert_bounds))
    return reports
