"""Command-line entry point.

    ma2scale solve --config run.cfg --out results/
    ma2scale study --benchmark smooth --levels 3 --out study/
    ma2scale check --n 8 --seed 1
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from .checks import comparison_suite, monotonicity_suite, superadditivity_suite
from .directions import build_direction_set
from .errors import MA2ScaleError, NonConvergenceError
from .fem import NodalField
from .mesh import TriangleMesh, build_unit_square_mesh, refine_uniform
from .operator import CLASS_NAMES, TwoScaleParams, apply_operator, build_stencils, truncation_error_map
from .problems import builtin, exact_error, problem_from_expressions
from .solvers import (
    _boundary_values,
    hull_subsolution,
    newton_solve,
    perron_solve,
    poisson_initial_guess,
)
from .study import MAX_LEVELS, run_study

log = logging.getLogger("ma2scale")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2

KNOWN_KEYS = {
    "problem.benchmark",
    "problem.f",
    "problem.g",
    "problem.exact",
    "mesh.n",
    "mesh.dir",
    "delta.value",
    "delta.alpha",
    "delta.c",
    "delta.snap",
    "directions.D",
    "directions.theta",
    "solver.type",
    "solver.rtol",
    "solver.max_iter",
    "solver.max_backtracks",
    "solver.node_tol",
    "solver.max_sweeps",
    "init.type",
    "output.eps",
}


class ConfigError(MA2ScaleError):
    pass


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    cfg = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            if key not in KNOWN_KEYS:
                log.warning("%s:%d: unknown key %r ignored", path, lineno, key)
                continue
            cfg[key] = value
    return cfg


def _get(cfg, key, conv, default=None):
    if key not in cfg:
        return default
    try:
        return conv(cfg[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: invalid value {cfg[key]!r}") from None


def _bool(s):
    s = s.lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def setup_from_config(cfg):
    """Build (problem, mesh, params, settings) from a parsed config."""
    bench = None
    if "problem.benchmark" in cfg:
        try:
            bench = builtin(cfg["problem.benchmark"])
        except MA2ScaleError as exc:
            raise ConfigError(f"problem.benchmark: {exc}") from None
        problem = bench.problem
    elif "problem.f" in cfg:
        try:
            problem = problem_from_expressions(cfg["problem.f"], cfg.get("problem.g"), cfg.get("problem.exact"))
        except MA2ScaleError as exc:
            raise ConfigError(f"problem: {exc}") from None
    else:
        raise ConfigError("problem: need problem.benchmark or problem.f")

    if "mesh.dir" in cfg:
        try:
            mesh = TriangleMesh.load(cfg["mesh.dir"])
        except (OSError, KeyError, MA2ScaleError) as exc:
            raise ConfigError(f"mesh.dir: {exc}") from None
        h_nominal = mesh.h
    else:
        n = _get(cfg, "mesh.n", int, 32)
        if n < 2:
            raise ConfigError("mesh.n: must be at least 2")
        mesh = build_unit_square_mesh(n)
        h_nominal = 1.0 / n

    if "delta.value" in cfg:
        delta = _get(cfg, "delta.value", float)
    else:
        alpha = _get(cfg, "delta.alpha", float, bench.alpha if bench else 0.5)
        c = _get(cfg, "delta.c", float, bench.delta_const if bench else 1.0)
        snap = _get(cfg, "delta.snap", _bool, True)
        delta = c * h_nominal**alpha
        if snap:
            delta = max(1, round(delta / h_nominal)) * h_nominal

    if "directions.D" in cfg and "directions.theta" in cfg:
        raise ConfigError("directions.D and directions.theta are mutually exclusive")
    try:
        if "directions.theta" in cfg:
            dirs = build_direction_set(theta=_get(cfg, "directions.theta", float))
        elif "directions.D" in cfg:
            dirs = build_direction_set(D=_get(cfg, "directions.D", int))
        elif bench is not None:
            dirs = build_direction_set(D=bench.D(h_nominal))
        else:
            dirs = build_direction_set(theta=min(math.pi / 2, h_nominal**0.5))
    except MA2ScaleError as exc:
        raise ConfigError(f"directions: {exc}") from None
    try:
        params = TwoScaleParams(h_nominal, delta, dirs)
    except MA2ScaleError as exc:
        raise ConfigError(f"delta: {exc}") from None

    settings = {
        "solver": cfg.get("solver.type", "newton"),
        "rtol": _get(cfg, "solver.rtol", float, 1e-8),
        "max_iter": _get(cfg, "solver.max_iter", int, 100),
        "max_backtracks": _get(cfg, "solver.max_backtracks", int, 30),
        "node_tol": _get(cfg, "solver.node_tol", float, None),
        "max_sweeps": _get(cfg, "solver.max_sweeps", int, 100000),
        "init": cfg.get("init.type", "poisson"),
        "eps": _get(cfg, "output.eps", float, 1e-6),
    }
    if settings["solver"] not in ("newton", "perron"):
        raise ConfigError(f"solver.type: expected newton or perron, got {settings['solver']!r}")
    if settings["init"] not in ("poisson", "prolong", "hull"):
        raise ConfigError(f"init.type: expected poisson, prolong or hull, got {settings['init']!r}")
    return problem, mesh, params, settings


def _initial_field(problem, mesh, params, settings, stencils):
    kind = "hull" if settings["solver"] == "perron" else settings["init"]
    if kind == "hull":
        return hull_subsolution(mesh, problem, stencils=stencils)
    if kind == "prolong":
        if mesh.n_vertices < 9 or int(round(math.sqrt(mesh.n_vertices))) ** 2 != mesh.n_vertices:
            raise ConfigError("init.type: prolong needs a structured unit-square mesh")
        n = int(round(math.sqrt(mesh.n_vertices))) - 1
        if n % 2 or n < 4:
            raise ConfigError("init.type: prolong needs an even mesh.n >= 4")
        coarse = build_unit_square_mesh(n // 2)
        cparams = TwoScaleParams(2.0 / n, max(params.delta, 2.0 / n), params.directions)
        cu, _ = newton_solve(problem, coarse, cparams, poisson_initial_guess(coarse, problem))
        fine, P = refine_uniform(coarse)
        # map refined ordering back onto the lattice ordering by coordinates
        order = np.lexsort((fine.vertices[:, 0], fine.vertices[:, 1]))
        u0 = np.empty(mesh.n_vertices)
        u0[np.lexsort((mesh.vertices[:, 0], mesh.vertices[:, 1]))] = (P @ cu.values)[order]
        u0[mesh.boundary] = _boundary_values(mesh, problem)
        return NodalField(mesh, u0)
    return poisson_initial_guess(mesh, problem)


def write_outputs(out, u, problem, stencils, eps, report_dict):
    os.makedirs(out, exist_ok=True)
    mesh = u.mesh
    u.dump(os.path.join(out, "field.csv"))
    ev = apply_operator(u, stencils)
    angles = stencils.params.directions.angles
    with open(os.path.join(out, "operator.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "T", "argmin_angle"])
        for k, i in enumerate(stencils.nodes):
            w.writerow([int(i), f"{ev.values[k]:.17g}", f"{angles[ev.argmin[k]]:.17g}"])
    classes, r = truncation_error_map(u, problem.f, stencils, eps=eps)
    with open(os.path.join(out, "signs.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x", "y", "class", "residual"])
        for k, i in enumerate(stencils.nodes):
            x, y = mesh.vertices[i]
            w.writerow([int(i), f"{x:.17g}", f"{y:.17g}", CLASS_NAMES[int(classes[k])], f"{r[k]:.17g}"])
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report_dict, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_solve(args):
    try:
        cfg = read_config(args.config)
        if args.solver:
            cfg["solver.type"] = args.solver
        problem, mesh, params, settings = setup_from_config(cfg)
        stencils = build_stencils(mesh, params)
        init = _initial_field(problem, mesh, params, settings, stencils)
    except MA2ScaleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    info = {"solver": settings["solver"], "N": mesh.n_vertices, "P": params.directions.P, "delta": params.delta}
    try:
        if settings["solver"] == "perron":
            u = perron_solve(
                problem, mesh, params, init, node_tol=settings["node_tol"],
                max_sweeps=settings["max_sweeps"], stencils=stencils,
            )
            info.update(converged=True)
        else:
            u, report = newton_solve(
                problem, mesh, params, init, rtol=settings["rtol"], max_iter=settings["max_iter"],
                max_backtracks=settings["max_backtracks"], stencils=stencils,
            )
            info.update(report.as_dict())
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        rep = exc.report
        if rep is not None and hasattr(rep, "as_dict"):
            info.update(rep.as_dict())
        info["converged"] = False
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "report.json"), "w") as fh:
            json.dump(info, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return EXIT_NONCONVERGED
    except MA2ScaleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    if problem.exact is not None:
        info["linf_error"] = exact_error(u, problem)
    info.pop("runtime", None)  # keep report.json reproducible
    write_outputs(args.out, u, problem, stencils, settings["eps"], info)
    print(json.dumps({k: info[k] for k in info if k not in ("residual_history", "damping_history")}))
    return EXIT_OK


def cmd_study(args):
    if not 1 <= args.levels <= MAX_LEVELS:
        print(f"error: --levels must be between 1 and {MAX_LEVELS}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        table = run_study(args.benchmark, args.levels)
    except MA2ScaleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    table.write(args.out)
    print(f"{'h':>10} {'N':>7} {'P':>3} {'Linf error':>11} {'steps':>5}")
    for r in table.rows:
        flag = "" if r.converged else "  (not converged)"
        print(f"{r.h:10.6f} {r.N:7d} {r.P:3d} {r.linf_error:11.3e} {r.newton_steps:5d}{flag}")
    print(f"rate: {table.rate():.3f}")
    return EXIT_OK if all(r.converged for r in table.rows) else EXIT_NONCONVERGED


def cmd_check(args):
    mesh = build_unit_square_mesh(args.n)
    dirs = build_direction_set(D=args.D)
    params = TwoScaleParams(1.0 / args.n, (1.0 / args.n) ** 0.5, dirs)
    stencils = build_stencils(mesh, params)
    ok = True
    for suite in (comparison_suite, monotonicity_suite, superadditivity_suite):
        res = suite(stencils, seed=args.seed)
        ok &= res.passed
        print(f"{res.name:16s} checked={res.checked:4d} violations={res.violations} worst={res.worst:.3e}")
    return EXIT_OK if ok else EXIT_NONCONVERGED


def build_parser():
    p = argparse.ArgumentParser(prog="ma2scale", description="Two-scale Monge-Ampère solver")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run one solve from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="out")
    s.add_argument("--solver", choices=["newton", "perron"])
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("study", help="convergence study for a builtin benchmark")
    s.add_argument("--benchmark", required=True, choices=["smooth", "discontinuous", "unbounded"])
    s.add_argument("--levels", type=int, default=3)
    s.add_argument("--out", default="study")
    s.set_defaults(func=cmd_study)

    s = sub.add_parser("check", help="randomised comparison/monotonicity suites")
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--D", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
