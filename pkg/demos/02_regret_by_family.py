"""Cumulative regret of TS, NPB and WB on four reward families.

A scaled-down version of the K=10 benchmark: Bernoulli, truncated normal,
Beta and triangular arms with means drawn uniformly.  On Bernoulli rewards
WB and TS share a law; on the others TS must binarize its rewards, which
throws information away.

Run time is about a minute; raise RUNS or HORIZON for smoother curves.
"""
from __future__ import annotations

from bootbandit.sim import MABExperiment, run_mab_experiment

RUNS, HORIZON = 40, 3000

for family in ("bernoulli", "truncnorm", "beta", "triangular"):
    traces = run_mab_experiment(MABExperiment(family=family, n_arms=10, horizon=HORIZON, runs=RUNS, master_seed=5))
    row = "  ".join(f"{name}={tr.mean[-1]:7.1f} +- {tr.stderr[-1]:4.1f}" for name, tr in traces.items())
    print(f"{family:11s} {row}")
