"""
Shared fixtures. Tests marked `slow` reproduce full convergence tables and
only run with --runslow.
"""
import numpy as np
import pytest

from brinkman.mesh import ALL_DIRICHLET, MIXED_BOUNDARY, classify_boundary, crisscross_grid, diagonal_grid
from brinkman.verification import smooth_case


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow table reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mixed_mesh():
    """diagonal_grid(2) with Dirichlet on the left and top sides."""
    return classify_boundary(diagonal_grid(2), MIXED_BOUNDARY)


@pytest.fixture
def dirichlet_mesh():
    return classify_boundary(diagonal_grid(2), ALL_DIRICHLET)


@pytest.fixture
def crisscross_mesh():
    return classify_boundary(crisscross_grid(2), MIXED_BOUNDARY)


@pytest.fixture
def case():
    return smooth_case(1e-3)
