"""Why NPB with one pseudo-count pair can fail on a two-arm instance.

Arm 1 pays Bernoulli(1/2); arm 2 pays 1/4 and is known to the agent.  NPB
pulls arm 1 only when its bootstrap mean reaches 1/4.  After m zeros the
chance of that is P(Bino(m+2, 1/(m+2)) >= (m+2)/4), which decays like
exp(-m log m / 20), so the agent can sit on arm 2 for a long time.

The first part checks the two ingredients of that argument by simulation.
The second runs the instance itself at a desk-scale horizon.  A bad
history needs m zeros in a row (probability 2^-m), so at these horizons NPB
with pseudo-counts (1, 1) still looks fine; dropping the pseudo-counts makes
the failure visible immediately, because a single early zero freezes arm 1.
"""
from __future__ import annotations

from bootbandit.dist import RngStream
from bootbandit.sim import MABExperiment, PolicySpec, loglog_slope, run_mab_experiment
from bootbandit.theory import bad_history_probe

for m in (3, 8, 15):
    r = bad_history_probe(m, 4000, 4000, RngStream(m))
    print(
        f"m={m:2d}: P(first m rewards are 0) = {r.event_freq:.2e} (2^-m = {r.event_expected:.2e}); "
        f"arm-2 run after them {r.run_length_mean:7.1f} +- {r.run_length_se:5.1f} "
        f"(truncated geometric predicts {r.run_length_expected:7.1f})"
    )

cfg = MABExperiment(
    family="theorem1",
    horizon=20_000,
    runs=100,
    master_seed=3,
    policies=[
        PolicySpec("ts", "ts"),
        PolicySpec("npb(1,1)", "npb"),
        PolicySpec("npb(0,0)", "npb", {"pseudo_pos": 0, "pseudo_neg": 0}),
    ],
)
print()
for name, tr in run_mab_experiment(cfg).items():
    slope = loglog_slope(tr.mean, (2000, 20_000))
    print(f"{name:9s} regret at T: {tr.mean[-1]:8.1f} +- {tr.stderr[-1]:6.1f}   log-log slope {slope:.2f}")
