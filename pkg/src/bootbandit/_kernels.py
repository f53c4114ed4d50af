"""Compiled inner loops for bootstrap means over stored rewards.

The general (non-binary) NPB and WB policies redraw one weight or one
resample index per stored reward, per arm, per round.  Those loops are
compiled with numba when it is available.  The kernels draw from the
caller's :class:`numpy.random.Generator`, so results replay exactly for a
given seed.
"""
from __future__ import annotations

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

HAVE_NUMBA = numba is not None

__all__ = ["HAVE_NUMBA", "PaddedSampleStore"]


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _weighted_means(vals, sizes, gen, out):
        for s in range(sizes.shape[0]):
            n = sizes[s]
            if n == 0:
                out[s] = 0.5
                continue
            num = 0.0
            den = 0.0
            for i in range(n):
                w = gen.standard_exponential()
                num += w * vals[s, i]
                den += w
            out[s] = num / den

    @numba.njit(cache=True)
    def _resampled_means(vals, sizes, gen, out):
        for s in range(sizes.shape[0]):
            n = sizes[s]
            if n == 0:
                out[s] = 0.5
                continue
            acc = 0.0
            for _ in range(n):
                j = int(gen.random() * n)
                if j >= n:
                    j = n - 1
                acc += vals[s, j]
            out[s] = acc / n


class PaddedSampleStore:
    """Rewards of every (run, arm) pair in a padded ``(runs * arms, capacity)`` array.

    Drop-in replacement for :class:`bootbandit.policy.SampleStore` backed by
    the compiled kernels.  Each segment starts with ``pseudo_pos`` ones and
    ``pseudo_neg`` zeros.
    """

    def __init__(self, n_runs: int, n_arms: int, pseudo_pos: int = 1, pseudo_neg: int = 1, capacity: int = 64):
        if not HAVE_NUMBA:
            raise RuntimeError("PaddedSampleStore needs numba")
        self.n_runs, self.n_arms = n_runs, n_arms
        n0 = pseudo_pos + pseudo_neg
        self.vals = np.zeros((n_runs * n_arms, max(capacity, 2 * n0, 1)))
        self.vals[:, :pseudo_pos] = 1.0
        self.sizes = np.full(n_runs * n_arms, n0, dtype=np.int64)
        self._rows = np.arange(n_runs)

    def append(self, arms: np.ndarray, rewards: np.ndarray) -> None:
        seg = self._rows * self.n_arms + np.asarray(arms)
        pos = self.sizes[seg]
        if pos.max() >= self.vals.shape[1]:
            grown = np.zeros((self.vals.shape[0], 2 * self.vals.shape[1]))
            grown[:, : self.vals.shape[1]] = self.vals
            self.vals = grown
        self.vals[seg, pos] = rewards
        self.sizes[seg] = pos + 1

    def segment(self, run: int, arm: int) -> np.ndarray:
        s = run * self.n_arms + arm
        return self.vals[s, : self.sizes[s]]

    def weighted_means(self, rng) -> np.ndarray:
        out = np.empty(self.sizes.size)
        _weighted_means(self.vals, self.sizes, rng.gen, out)
        return out.reshape(self.n_runs, self.n_arms)

    def resampled_means(self, rng) -> np.ndarray:
        out = np.empty(self.sizes.size)
        _resampled_means(self.vals, self.sizes, rng.gen, out)
        return out.reshape(self.n_runs, self.n_arms)
