import pytest

from ptwell.core import WellParams

ACCEPTANCE_LINES_KEY = pytest.StashKey[list]()


@pytest.fixture
def well():
    return WellParams(9.0, 15.0, 1.0, 0.5)


@pytest.fixture
def scatter_well():
    return WellParams(10.0, 10.0, 1.0, 0.5)


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
