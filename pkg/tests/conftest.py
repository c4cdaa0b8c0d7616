"""Shared fixtures and hypothesis strategies for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from bicausal import validate_kernel

WORKED = [[0.9, 0.1], [0.2, 0.8]]


@pytest.fixture
def worked_kernel():
    """The standard two-state example: TV between rows is 0.7."""
    return validate_kernel(WORKED)


def random_positive_kernel(rng: np.random.Generator, n: int, concentration: float = 2.0):
    """Strictly positive rows: irreducible, aperiodic, Doeblin-contractive."""
    rows = rng.dirichlet(np.full(n, concentration), size=n)
    rows = np.maximum(rows, 1e-4)
    return validate_kernel(rows / rows.sum(axis=1, keepdims=True))


@st.composite
def distributions(draw, n: int | None = None, min_n: int = 2, max_n: int = 5):
    if n is None:
        n = draw(st.integers(min_n, max_n))
    raw = draw(
        st.lists(
            st.floats(0.0, 1.0, allow_nan=False, allow_infinity=False),
            min_size=n,
            max_size=n,
        )
    )
    v = np.array(raw) + 1e-3
    return v / v.sum()


@st.composite
def kernels(draw, n: int | None = None, min_n: int = 2, max_n: int = 4):
    """Row-stochastic matrices with strictly positive entries."""
    if n is None:
        n = draw(st.integers(min_n, max_n))
    raw = draw(
        st.lists(
            st.floats(0.0, 1.0, allow_nan=False, allow_infinity=False),
            min_size=n * n,
            max_size=n * n,
        )
    )
    m = np.array(raw).reshape(n, n) + 1e-2
    return validate_kernel(m / m.sum(axis=1, keepdims=True))


@st.composite
def kernel_pairs(draw, min_n: int = 2, max_n: int = 4):
    n = draw(st.integers(min_n, max_n))
    return draw(kernels(n=n)), draw(kernels(n=n))
