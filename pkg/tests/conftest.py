from __future__ import annotations

import numpy as np
import pytest

from wlseno import fixtures
from wlseno.mesh import interval_mesh


@pytest.fixture(scope="session")
def periodic_line():
    return interval_mesh(np.linspace(0.0, 1.0, 33), periodic=True)


@pytest.fixture(scope="session")
def square8():
    return fixtures.square_mesh(8)


@pytest.fixture(scope="session")
def rough_square():
    return fixtures.square_mesh(8, perturb=0.25, diagonals="random")


@pytest.fixture(scope="session")
def cube3():
    return fixtures.cube_mesh(3)


@pytest.fixture(scope="session")
def disk12():
    return fixtures.disk_mesh(12)


@pytest.fixture(scope="session")
def ball6():
    return fixtures.ball_mesh(6)


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[num])
