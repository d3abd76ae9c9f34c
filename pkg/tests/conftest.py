import numpy as np
import pytest

from macstbc.design_algebra import build_design, build_square_cod, spatial_multiplexing

ASDC_PARAMS = [(2, 2), (2, 3), (4, 2), (4, 3), (3, 2), (5, 2), (3, 3), (2, 4)]

_acceptance_lines = []


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture(scope="session")
def alamouti():
    return build_design(2, 2)


@pytest.fixture(scope="session")
def cod4():
    return build_square_cod(2)


@pytest.fixture(scope="session")
def cod8():
    return build_square_cod(3)


@pytest.fixture(scope="session")
def spatial():
    return spatial_multiplexing(2)


@pytest.fixture(scope="session")
def acceptance_log():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
