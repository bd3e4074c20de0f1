import numpy as np
import pytest

from ordfem.mesh import build_structured_cube


@pytest.fixture(scope="session")
def mesh1():
    return build_structured_cube(1)


@pytest.fixture(scope="session")
def mesh2():
    return build_structured_cube(2)


@pytest.fixture(scope="session")
def mesh3():
    return build_structured_cube(3)


@pytest.fixture
def rng():
    return np.random.default_rng(0x5EED)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS, summary_lines
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in summary_lines():
        terminalreporter.write_line(line)
