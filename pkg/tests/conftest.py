import numpy as np
import pytest

from ma2scale.directions import build_direction_set
from ma2scale.mesh import build_unit_square_mesh
from ma2scale.operator import TwoScaleParams, build_stencils


def make_stencils(n, D=5, delta=None):
    mesh = build_unit_square_mesh(n)
    h = 1.0 / n
    params = TwoScaleParams(h, delta if delta is not None else h**0.5, build_direction_set(D=D))
    return mesh, params, build_stencils(mesh, params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def square8():
    return make_stencils(8)


ACCEPTANCE_LINES = []


def record(number, passed, detail):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
