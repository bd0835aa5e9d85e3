import sys

import pytest

from point_scatterer.geometry import Point
from point_scatterer.greens import make_handle
from point_scatterer.maass import load_maass_dataset
from point_scatterer.orbits import enumerate_orbits
from point_scatterer.transforms import make_test_function

Z0 = Point(0.0, 2.0)


@pytest.fixture(scope="session")
def z0():
    return Z0


@pytest.fixture(scope="session")
def table10():
    return enumerate_orbits(Z0, 10.0)


@pytest.fixture(scope="session")
def table12():
    return enumerate_orbits(Z0, 12.0)


@pytest.fixture(scope="session")
def dataset():
    return load_maass_dataset()


@pytest.fixture(scope="session")
def handle(table10, dataset):
    return make_handle(Z0, 1.0, table10, dataset=dataset)


@pytest.fixture(scope="session")
def handle12(table12, dataset):
    return make_handle(Z0, 1.0, table12, dataset=dataset)


@pytest.fixture(scope="session")
def critical_handle(handle):
    return handle.with_mode("spectral-expansion")


@pytest.fixture(scope="session")
def gaussian():
    return make_test_function(1.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
