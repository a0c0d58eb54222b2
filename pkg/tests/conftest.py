import math

import numpy as np
import pytest
from hypothesis import strategies as st

INF = math.inf


def vectors(min_dim=1, max_dim=6, lo=-50.0, hi=50.0):
    """Hypothesis strategy: finite float vectors, with exact zeros mixed in."""
    elem = st.one_of(st.just(0.0), st.floats(lo, hi, allow_nan=False, allow_infinity=False))
    return st.lists(elem, min_size=min_dim, max_size=max_dim).map(np.array)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def ksupport_l2_oracle(y, k):
    """Sorting-based k-support norm of the euclidean source, independent of the library.

    With z the sorted moduli, find r in {0..k-1} such that
    z[k-r-2] > tail / (r+1) >= z[k-r-1] (0-based, z[-1] = +inf), where
    tail = sum(z[k-r-1:]); then the squared norm is sum(z[:k-r-1]^2) + tail^2/(r+1).
    """
    z = np.sort(np.abs(np.asarray(y, dtype=float)))[::-1]
    for r in range(k):
        tail = z[k - r - 1:].sum()
        left = math.inf if k - r - 2 < 0 else z[k - r - 2]
        if left > tail / (r + 1) >= z[k - r - 1]:
            return math.sqrt((z[:k - r - 1] ** 2).sum() + tail ** 2 / (r + 1))
    raise AssertionError("no admissible r")
