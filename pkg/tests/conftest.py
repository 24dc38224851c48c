import numpy as np
import pytest

from homsim.grid import TimeGrid, gaussian_envelope


@pytest.fixture(scope="session")
def default_grid():
    return TimeGrid.symmetric(675.0, 0.5)


@pytest.fixture(scope="session")
def packet150(default_grid):
    return gaussian_envelope(default_grid, 0.0, 150.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)
