import numpy as np
import pytest

from gamowexp.problem import fixture, square_barrier
from gamowexp.spectrum import search_spectrum


@pytest.fixture(scope="session")
def barrier():
    return fixture("paper-square-barrier")


@pytest.fixture(scope="session")
def well():
    return fixture("square-well")


@pytest.fixture(scope="session")
def free():
    return fixture("free")


@pytest.fixture(scope="session")
def barrier_search(barrier):
    return search_spectrum(barrier, k_max=25)


@pytest.fixture(scope="session")
def well_search(well):
    return search_spectrum(well, M=60.0)


@pytest.fixture(scope="session")
def barrier_firsts(barrier_search):
    return sorted(barrier_search.by_sheet("first"), key=lambda r: r.k)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def shallow_well(depth):
    return square_barrier(-depth)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
