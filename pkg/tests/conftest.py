from __future__ import annotations

import pytest

from bootbandit.dist import RngStream


@pytest.fixture
def rng() -> RngStream:
    return RngStream(20240611)


def total_variation(p, q) -> float:
    import numpy as np

    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
