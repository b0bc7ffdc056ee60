import numpy as np
import pytest

from fujitalab.geometry import ManifoldModel
from fujitalab.grid import discretize
from fujitalab.spectral import solve_ground_state


@pytest.fixture(scope="session")
def h2():
    return ManifoldModel.hyperbolic(2)


@pytest.fixture(scope="session")
def h3():
    return ManifoldModel.hyperbolic(3)


@pytest.fixture(scope="session")
def h4():
    return ManifoldModel.hyperbolic(4)


@pytest.fixture(scope="session")
def gs_h2(h2):
    return solve_ground_state(h2)


@pytest.fixture(scope="session")
def grid_h2(h2):
    return discretize(h2, 20.0, 800)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
