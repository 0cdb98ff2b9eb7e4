import math

import pytest

from billiard_zeta.database import build_database
from billiard_zeta.geometry import Ball, Scene, three_disk_scene

SQRT6 = math.sqrt(6.0)
LAMBDA_2CYCLE = 49 + 20 * SQRT6  # (5 + 2 sqrt 6)^2
TAU_3CYCLE = 3 * (6 - math.sqrt(3))

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def scene():
    return three_disk_scene()


@pytest.fixture(scope="session")
def sphere_scene():
    h = 3 * math.sqrt(3)
    return Scene(3, (Ball((0.0, 0.0, 0.0), 1.0), Ball((6.0, 0.0, 0.0), 1.0), Ball((3.0, h, 0.0), 1.0)))


@pytest.fixture(scope="session")
def db10(scene):
    return build_database(scene, 10)


@pytest.fixture(scope="session")
def db8(db10):
    return db10.restrict(n_max=8)


@pytest.fixture(scope="session")
def db4(db10):
    return db10.restrict(n_max=4)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
