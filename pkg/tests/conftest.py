"""Shared instance factories for the test suite."""

import numpy as np
import pytest

from eurot.core import CostMatrix, Measure, Problem


def random_simplex(rng, size, zeros=0):
    """Random point on the simplex, optionally with exact-zero entries."""
    w = rng.random(size)
    if zeros:
        w[rng.choice(size, size=zeros, replace=False)] = 0.0
    return w / w.sum()


def random_problem(seed, n=5, m=5, gamma=0.1, normalise=True, zeros=(0, 0)):
    rng = np.random.default_rng(seed)
    a = random_simplex(rng, n, zeros[0])
    b = random_simplex(rng, m, zeros[1])
    c = rng.random((n, m))
    if normalise:
        c /= c.max()
    return Problem(Measure(a), Measure(b), CostMatrix(c), gamma)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
