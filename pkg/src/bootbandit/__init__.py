"""Bootstrap exploration for bandits.

Nonparametric (NPB) and weighted (WB) bootstrap policies next to Thompson
sampling and epsilon-greedy, a replicated experiment engine, contextual
one-vs-all policies and exact checks of the lemmas behind the NPB lower
bound.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .dist import RngStream
from .env import BanditInstance, ContextualDataset, RewardModel, random_instance, theorem1_instance
from .policy import make_policy
from .sim import ContextualExperiment, MABExperiment, PolicySpec, run_contextual_experiment, run_mab_experiment

__all__ = [
    "__version__",
    "RngStream",
    "RewardModel",
    "BanditInstance",
    "ContextualDataset",
    "random_instance",
    "theorem1_instance",
    "make_policy",
    "MABExperiment",
    "ContextualExperiment",
    "PolicySpec",
    "run_mab_experiment",
    "run_contextual_experiment",
]
