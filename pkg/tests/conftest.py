"""Shared fixtures and parameter sets for the test suite."""

import numpy as np
import pytest

from mrbasset import TaylorGreenField, derive_params


@pytest.fixture(scope="session")
def bench_params():
    """Strong-memory benchmark parameters (memory coefficient ~2.5)."""
    return derive_params(R=2.0 / 3.0, St=0.1, Re=100.0)


@pytest.fixture(scope="session")
def weak_params():
    """Weak-memory parameters (memory coefficient ~0.08)."""
    return derive_params(R=0.1, St=2.0, Re=100.0)


@pytest.fixture(scope="session")
def tg_field():
    return TaylorGreenField()


@pytest.fixture()
def rng():
    return np.random.default_rng(1729)
