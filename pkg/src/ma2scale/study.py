"""Convergence studies over the uniform square meshes h = 2^-5, 2^-6, ..."""
from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .directions import build_direction_set
from .errors import MA2ScaleError
from .fem import NodalField
from .mesh import build_unit_square_mesh, refine_uniform
from .operator import TwoScaleParams, build_stencils
from .problems import builtin, exact_error
from .solvers import newton_solve, poisson_initial_guess, _boundary_values

log = logging.getLogger(__name__)

FIRST_LEVEL = 5
MAX_LEVELS = 4  # h = 2^-8 needs ~1 GB for the stencil tables

TABLE_COLUMNS = ["h", "N", "P", "delta", "linf_error", "newton_steps", "converged", "min_tau"]


@dataclass
class StudyRow:
    h: float
    N: int
    P: int
    delta: float
    linf_error: float
    newton_steps: int
    converged: bool
    min_tau: float
    runtime: float
    field: NodalField = None
    report: object = None


@dataclass
class ConvergenceTable:
    benchmark: str
    rows: list = field(default_factory=list)

    def rate(self):
        """Least-squares slope of log(error) against log(h) over converged rows."""
        good = [r for r in self.rows if r.converged and r.linf_error > 0]
        if len(good) < 2:
            return float("nan")
        h = np.log([r.h for r in good])
        e = np.log([r.linf_error for r in good])
        return float(np.polyfit(h, e, 1)[0])

    def write(self, out):
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "table.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TABLE_COLUMNS)
            for r in self.rows:
                w.writerow(
                    [
                        f"{r.h:.17g}",
                        r.N,
                        r.P,
                        f"{r.delta:.17g}",
                        f"{r.linf_error:.17g}",
                        r.newton_steps,
                        int(r.converged),
                        f"{r.min_tau:.17g}",
                    ]
                )
        # wall-clock times would break bit-identical reruns of table.csv
        with open(os.path.join(out, "timings.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "runtime_seconds"])
            for r in self.rows:
                w.writerow([f"{r.h:.17g}", f"{r.runtime:.3f}"])
        with open(os.path.join(out, "rate.json"), "w") as fh:
            json.dump({"benchmark": self.benchmark, "rate": self.rate()}, fh, indent=2)
            fh.write("\n")


def run_study(name, levels=3, rtol=1e-8, max_iter=100, max_backtracks=30, keep_fields=False):
    """Solve benchmark ``name`` on ``levels`` meshes starting at h = 2^-5.

    Levels after the first start from the prolonged previous solution
    unless the benchmark asks for a fresh Poisson guess on every mesh.  A
    level that fails to converge is flagged and the study moves on.
    """
    if not 1 <= levels <= MAX_LEVELS:
        raise ValueError(f"levels must be between 1 and {MAX_LEVELS}")
    bench = builtin(name)
    table = ConvergenceTable(name)
    prev = None
    for level in range(FIRST_LEVEL, FIRST_LEVEL + levels):
        t0 = time.perf_counter()
        n = 2**level
        h = 1.0 / n
        if prev is not None and prev[0].n_vertices == (n // 2 + 1) ** 2:
            mesh, P = refine_uniform(prev[0])
        else:
            mesh, P = build_unit_square_mesh(n), None
        dirs = build_direction_set(D=bench.D(h))
        params = TwoScaleParams(h, bench.delta(h), dirs)
        stencils = build_stencils(mesh, params)
        if bench.init == "prolong" and prev is not None and prev[1] is not None:
            u0 = P @ prev[1].values
            u0[mesh.boundary] = _boundary_values(mesh, bench.problem)
            init = NodalField(mesh, u0)
        else:
            init = poisson_initial_guess(mesh, bench.problem)
        try:
            u, report = newton_solve(
                bench.problem, mesh, params, init, rtol=rtol, max_iter=max_iter,
                max_backtracks=max_backtracks, stencils=stencils,
            )
            converged = True
        except MA2ScaleError as exc:
            log.warning("level h=2^-%d failed: %s", level, exc)
            u, report, converged = None, getattr(exc, "report", None), False
        err = exact_error(u, bench) if u is not None else float("nan")
        taus = report.damping_history if report is not None else []
        row = StudyRow(
            h=h,
            N=mesh.n_vertices,
            P=dirs.P,
            delta=params.delta,
            linf_error=err,
            newton_steps=report.iterations if report is not None else 0,
            converged=converged,
            min_tau=min(taus) if taus else 1.0,
            runtime=time.perf_counter() - t0,
            field=u if keep_fields else None,
            report=report,
        )
        table.rows.append(row)
        log.info("h=2^-%d N=%d P=%d err=%.3e steps=%d", level, row.N, row.P, err, row.newton_steps)
        prev = (mesh, u)
    return table
