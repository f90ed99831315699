import functools

import numpy as np
import pytest

from spinrelax.model import toy_bath, toy_point

TOY_TEMPS = tuple(float(t) for t in np.linspace(0.2, 2.0, 8))
TOY_FIELDS = (0.0, 0.002, 0.01)


@functools.lru_cache(maxsize=None)
def cached_toy_point(Bz, T, alpha=1e-3):
    return toy_point(Bz, T, toy_bath(alpha))


@pytest.fixture
def toy():
    return cached_toy_point


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)
