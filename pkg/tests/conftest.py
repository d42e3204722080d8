import functools

import numpy as np
import pytest

from chafee import find_equilibrium

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def equilibrium(lam, j, N=128):
    return find_equilibrium(lam, j, 1, N)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def eq():
    """Cached equilibrium lookup ``eq(lam, j, N=128)``."""
    return equilibrium


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
