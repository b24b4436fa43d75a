import numpy as np
import pytest

from kinslab.boundary import ConstantAccommodation, FluxDependentAccommodation, WallSpec
from kinslab.grid import WALLS, SpatialGrid, build_velocity_grid, wall_maxwellian


@pytest.fixture(scope="session")
def vgrid():
    return build_velocity_grid(8.0, 128)


@pytest.fixture(scope="session")
def sgrid():
    return SpatialGrid(1.0, 64)


def make_walls(vg, law=None, theta=1.0):
    law = law or ConstantAccommodation(1.0)
    return {w: WallSpec(wall_maxwellian(vg, theta, wall=w), law) for w in WALLS}


LAWS = [ConstantAccommodation(1e-3), ConstantAccommodation(0.25), ConstantAccommodation(0.5),
        ConstantAccommodation(1.0), FluxDependentAccommodation(0.3, 1.0)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
