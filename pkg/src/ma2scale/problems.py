"""Benchmark problems and user-defined problems from closed-form expressions."""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .fem import linf_node_error


@dataclass(frozen=True)
class ProblemSpec:
    """``det D^2 u = f`` in the domain, ``u = g`` on the boundary.

    ``f``, ``g`` and ``exact`` are vectorised callables ``(x, y) -> array``.
    """

    f: object
    g: object
    exact: object = None


@dataclass(frozen=True)
class Benchmark:
    name: str
    problem: ProblemSpec
    alpha: float  # delta = delta_const * h**alpha
    beta: float  # theta ~ h**beta, used only off the P table
    P_table: dict = field(default_factory=dict)  # level k (h = 2^-k) -> P
    init: str = "prolong"
    delta_const: float = 1.0
    snap: bool = True  # round delta to a multiple of h

    def delta(self, h):
        d = self.delta_const * h**self.alpha
        if self.snap:
            d = max(1, round(d / h)) * h
        return d

    def D(self, h):
        k = -math.log2(h)
        level = round(k)
        if abs(k - level) < 1e-12 and level in self.P_table:
            return self.P_table[level] // 4 + 1
        return math.ceil((math.pi / 2) / h**self.beta) + 1


def _smooth_u(x, y):
    return np.exp((x * x + y * y) / 2)


def _smooth_f(x, y):
    r2 = x * x + y * y
    return (1 + r2) * np.exp(r2)


X0 = (0.5, 0.5)
RADIUS = 0.2


def _disc_u(x, y):
    r = np.hypot(x - X0[0], y - X0[1])
    return 0.5 * np.maximum(r - RADIUS, 0.0) ** 2


def _disc_f(x, y):
    r = np.hypot(x - X0[0], y - X0[1])
    with np.errstate(divide="ignore"):
        val = 1 - RADIUS / r
    return np.where(r > 0, np.maximum(val, 0.0), 0.0)


def _unb_u(x, y):
    return -np.sqrt(2 - (x * x + y * y))


def _unb_f(x, y):
    return 2.0 / (2 - (x * x + y * y)) ** 2


_BUILTINS = {
    "smooth": Benchmark(
        "smooth",
        ProblemSpec(_smooth_f, _smooth_u, _smooth_u),
        alpha=0.5,
        beta=0.5,
        P_table={5: 16, 6: 24, 7: 36, 8: 52},
    ),
    "discontinuous": Benchmark(
        "discontinuous",
        ProblemSpec(_disc_f, _disc_u, _disc_u),
        alpha=0.8,
        beta=0.4,
        P_table={5: 20, 6: 28, 7: 36, 8: 48},
        # delta/h = 7 at h = 2^-7
        delta_const=7 * 2.0**-1.4,
    ),
    "unbounded": Benchmark(
        "unbounded",
        ProblemSpec(_unb_f, _unb_u, _unb_u),
        alpha=0.5,
        beta=0.5,
        P_table={5: 16, 6: 24, 7: 36, 8: 52},
        init="poisson",
    ),
}


def builtin(name):
    try:
        return _BUILTINS[name]
    except KeyError:
        raise InvalidArgument(
            f"unknown benchmark {name!r}; choose from {sorted(_BUILTINS)}"
        ) from None


def builtin_names():
    return sorted(_BUILTINS)


def exact_error(field, bench):
    exact = bench.problem.exact if isinstance(bench, Benchmark) else bench.exact
    if exact is None:
        raise InvalidArgument("problem has no exact solution")
    return linf_node_error(field, exact)


# -- expression grammar ---------------------------------------------------

_FUNCS = {
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "max": np.maximum,
    "min": np.minimum,
    "norm2": lambda *a: sum(np.asarray(t) ** 2 for t in a),
}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def parse_expression(text):
    """Compile an arithmetic expression in ``x`` and ``y`` to a vectorised callable.

    Supported: numbers, ``x``, ``y``, ``pi``, ``+ - * / ^`` (``**`` also
    accepted), unary minus, and the functions ``exp sqrt abs max min``
    plus ``norm2(x, y) = x^2 + y^2``.  ``norm2()`` with no arguments
    means ``x^2 + y^2``.
    """
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise InvalidArgument(f"cannot parse expression {text!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            c = float(node.value)
            return lambda x, y: c
        if isinstance(node, ast.Name):
            if node.id == "x":
                return lambda x, y: x
            if node.id == "y":
                return lambda x, y: y
            if node.id == "pi":
                return lambda x, y: math.pi
            raise InvalidArgument(f"unknown variable {node.id!r} in {text!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op, a, b = _BINOPS[type(node.op)], build(node.left), build(node.right)
            return lambda x, y: op(a(x, y), b(x, y))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            a = build(node.operand)
            sign = -1.0 if isinstance(node.op, ast.USub) else 1.0
            return lambda x, y: sign * a(x, y)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
            name = node.func.id
            if name not in _FUNCS:
                raise InvalidArgument(f"unknown function {name!r} in {text!r}")
            fn = _FUNCS[name]
            args = [build(a) for a in node.args]
            if name == "norm2" and not args:
                return lambda x, y: x * x + y * y
            if name in ("exp", "sqrt", "abs") and len(args) != 1:
                raise InvalidArgument(f"{name} takes one argument")
            if name in ("max", "min") and len(args) != 2:
                raise InvalidArgument(f"{name} takes two arguments")
            return lambda x, y: fn(*(a(x, y) for a in args))
        raise InvalidArgument(f"unsupported syntax in expression {text!r}")

    body = build(tree)

    def func(x, y):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(body(x, y), dtype=float), np.shape(x)).copy()

    func.expression = text
    return func


def problem_from_expressions(f, g=None, exact=None):
    ex = parse_expression(exact) if exact else None
    gf = parse_expression(g) if g else ex
    if gf is None:
        raise InvalidArgument("need boundary data g (or an exact solution)")
    return ProblemSpec(parse_expression(f), gf, ex)
