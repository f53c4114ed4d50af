"""Exact checks of the lemmas behind the NPB lower bound.

Prints one summary line per lemma and a few individual grid points.  The
same checks are available as ``bootbandit theory``.
"""
from __future__ import annotations

from bootbandit.theory import check_pull_probability, run_default_checks

for rep in run_default_checks():
    print(rep.to_text().splitlines()[0])

print()
print(check_pull_probability([14, 15, 30, 60, 100]).to_text())
