"""Shared fixtures: the bundled AutoBI triangle and a random-triangle factory."""

import numpy as np
import pytest

from reserve_lab import datasets
from reserve_lab.triangle import RunOffTriangle


@pytest.fixture(scope="session")
def autobi() -> RunOffTriangle:
    return datasets.load_autobi()


def make_random_triangle(rng: np.random.Generator, m: int) -> RunOffTriangle:
    """Strictly positive incremental triangle with a decaying development tail."""
    base = rng.uniform(500.0, 5000.0, size=m + 1)
    decay = rng.uniform(0.3, 1.2)
    pattern = np.exp(-decay * np.arange(m + 1))
    vals = np.outer(base, pattern) * rng.uniform(0.7, 1.3, size=(m + 1, m + 1))
    rows = [[vals[k, j] if k + j <= m else None for j in range(m + 1)]
            for k in range(m + 1)]
    return RunOffTriangle.from_incremental(rows)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
