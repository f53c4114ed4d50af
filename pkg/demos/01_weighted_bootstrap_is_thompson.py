"""Weighted bootstrap on binary rewards is Thompson sampling.

Weighting each observation by an Exp(1) draw and taking the weighted mean
gives Ga(a) / (Ga(a) + Ga(b)) for a positives and b negatives (pseudo-counts
included), i.e. a Beta(a, b) draw.  This script compares both samplers with
the Beta CDF and prints the Kolmogorov distance.
"""
from __future__ import annotations

import math

from bootbandit.dist import RngStream, beta_cdf, ks_statistic
from bootbandit.policy import ArmHistory, ts_bernoulli_sample, wb_bernoulli_sample, wb_general_sample

n = 50_000
crit = 1.95 / math.sqrt(n)
rng = RngStream(1)
print(f"0.001-level Kolmogorov critical value at n={n}: {crit:.4f}\n")
print(" pos neg |  WB (counts)  WB (weights)  TS")
for pos, neg in [(0, 0), (3, 1), (7, 12), (20, 2)]:
    h = ArmHistory.from_counts(pos, neg)
    cdf = beta_cdf(pos + 1, neg + 1)
    wb = ks_statistic(wb_bernoulli_sample(h, rng, n), cdf)
    hs = ArmHistory.from_samples([1.0] * pos + [0.0] * neg)
    wbw = ks_statistic(wb_general_sample(hs, rng, n), cdf)
    ts = ks_statistic(ts_bernoulli_sample(h, rng, n), cdf)
    print(f"{pos:4d} {neg:3d} |  {wb:.4f}       {wbw:.4f}        {ts:.4f}")
