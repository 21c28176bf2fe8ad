import math

import numpy as np
import pytest

from ma2scale.errors import InvalidArgument
from ma2scale.problems import builtin, builtin_names, parse_expression, problem_from_expressions


def fd_det_hessian(u, x, y, e=1e-4):
    uxx = (u(x + e, y) - 2 * u(x, y) + u(x - e, y)) / e**2
    uyy = (u(x, y + e) - 2 * u(x, y) + u(x, y - e)) / e**2
    uxy = (u(x + e, y + e) - u(x + e, y - e) - u(x - e, y + e) + u(x - e, y - e)) / (4 * e**2)
    return uxx * uyy - uxy**2


@pytest.mark.parametrize("name", ["smooth", "discontinuous", "unbounded"])
def test_exact_solutions_solve_the_equation(name, rng):
    p = builtin(name).problem
    pts = rng.uniform(0.05, 0.95, size=(50, 2))
    if name == "discontinuous":
        r = np.hypot(pts[:, 0] - 0.5, pts[:, 1] - 0.5)
        pts = pts[np.abs(r - 0.2) > 0.01]
    x, y = pts.T
    np.testing.assert_allclose(fd_det_hessian(p.exact, x, y), p.f(x, y), rtol=1e-4, atol=1e-5)
    np.testing.assert_array_equal(p.g(x, y), p.exact(x, y))


def test_benchmark_tables():
    s, d = builtin("smooth"), builtin("discontinuous")
    assert [4 * (s.D(2.0**-k) - 1) for k in (5, 6, 7, 8)] == [16, 24, 36, 52]
    assert [4 * (d.D(2.0**-k) - 1) for k in (5, 6, 7, 8)] == [20, 28, 36, 48]
    assert d.delta(2.0**-7) == pytest.approx(7 * 2.0**-7)
    assert s.delta(2.0**-6) == pytest.approx(2.0**-3)
    assert builtin("unbounded").init == "poisson"
    assert builtin_names() == ["discontinuous", "smooth", "unbounded"]


def test_discontinuous_f_vanishes_in_ball():
    f = builtin("discontinuous").problem.f
    assert f(np.array([0.5]), np.array([0.5]))[0] == 0.0
    assert f(np.array([0.6]), np.array([0.6]))[0] == 0.0
    assert f(np.array([1.0]), np.array([0.5]))[0] == pytest.approx(0.6)


def test_unknown_benchmark():
    with pytest.raises(InvalidArgument):
        builtin("nope")


@pytest.mark.parametrize(
    "text, x, y, value",
    [
        ("x^2 + y^2", 1.0, 2.0, 5.0),
        ("x**2 - -y", 2.0, 1.0, 5.0),
        ("exp(norm2(x, y)/2)", 0.3, 0.4, math.exp(0.125)),
        ("norm2()", 3.0, 4.0, 25.0),
        ("max(1 - 0.2/sqrt((x-0.5)^2 + (y-0.5)^2), 0)", 1.0, 0.5, 0.6),
        ("-sqrt(2 - norm2(x, y))", 1.0, 1.0, 0.0),
        ("abs(x - y) * pi", 0.0, 1.0, math.pi),
        ("min(x, y) / 2", 3.0, 4.0, 1.5),
        ("7", 0.1, 0.2, 7.0),
    ],
)
def test_expressions(text, x, y, value):
    f = parse_expression(text)
    assert f(np.array([x]), np.array([y]))[0] == pytest.approx(value)


def test_expression_vectorised_constant():
    f = parse_expression("2")
    np.testing.assert_array_equal(f(np.zeros(3), np.zeros(3)), [2.0, 2.0, 2.0])


@pytest.mark.parametrize(
    "text",
    ["z + 1", "__import__('os')", "x.real", "exp(x, y)", "max(x)", "log(x)", "x if y else 1", "x +", "'a'"],
)
def test_bad_expressions(text):
    with pytest.raises(InvalidArgument):
        parse_expression(text)


def test_problem_from_expressions():
    p = problem_from_expressions("1", exact="norm2()/2")
    assert p.g is p.exact
    with pytest.raises(InvalidArgument):
        problem_from_expressions("1")
