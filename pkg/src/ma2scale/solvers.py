"""Nonlinear solvers for the discrete Monge-Ampère system.

* :func:`newton_solve` -- damped semi-smooth Newton with the slant-derivative
  Jacobian of the min/product/negative-part operator.
* :func:`perron_solve` -- Gauss-Seidel Perron sweeps raising a discrete
  subsolution node by node; slow, used as an independent reference.
* :func:`poisson_initial_guess`, :func:`hull_subsolution` -- starting fields.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import ConvexHull, QhullError

from .errors import ConstructionError, InvalidArgument, InvalidData, NonConvergenceError
from .fem import NodalField, assemble_p1_poisson, interpolate, lumped_l2_norm, lumped_masses, sample
from .operator import apply_operator, build_stencils, is_discretely_convex
from .sparse import factor_and_solve, solve_sparse

log = logging.getLogger(__name__)


@dataclass
class NewtonReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    damping_history: list = field(default_factory=list)
    converged: bool = False
    discretely_convex: bool = None
    runtime: float = 0.0

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "residual_history": [float(r) for r in self.residual_history],
            "damping_history": [float(t) for t in self.damping_history],
            "converged": self.converged,
            "discretely_convex": self.discretely_convex,
            "runtime": self.runtime,
        }


def _forcing(mesh, problem):
    """``f`` at the interior nodes; tiny negative round-off is clamped to 0."""
    fv = sample(problem.f, mesh.vertices[mesh.interior])
    if not np.all(np.isfinite(fv)):
        raise InvalidData("f is not finite at some interior node")
    scale = 1.0 + (np.abs(fv).max() if len(fv) else 0.0)
    if np.any(fv < -1e-12 * scale):
        raise InvalidData("f must be nonnegative at the interior nodes")
    return np.maximum(fv, 0.0)


def _boundary_values(mesh, problem):
    gb = sample(problem.g, mesh.vertices[mesh.boundary])
    if not np.all(np.isfinite(gb)):
        raise InvalidData("g is not finite at some boundary node")
    return gb


def poisson_initial_guess(mesh, problem):
    """P1 Galerkin solution of ``Δu = sqrt(2 f)`` with ``u = g`` on the boundary."""
    s = np.sqrt(2.0 * _forcing(mesh, problem))
    gb = _boundary_values(mesh, problem)
    A, b = assemble_p1_poisson(mesh, s, gb)
    u = np.empty(mesh.n_vertices)
    u[mesh.boundary] = gb
    u[mesh.interior] = factor_and_solve(A, b) if len(b) else b
    return NodalField(mesh, u)


def jacobian_coefficients(s1, s2):
    """Slant-derivative weights of ``s1^+ s2^+ - s1^- - s2^-`` w.r.t. ``s1`` and ``s2``.

    Uses H+(s) = 1 for s > 0 else 0, and H-(s) = -1 for s <= 0 else 0.
    """
    c1 = np.where(s1 > 0, np.maximum(s2, 0.0), 1.0)
    c2 = np.where(s2 > 0, np.maximum(s1, 0.0), 1.0)
    return c1, c2


def assemble_jacobian(field, evaluation, stencils, interior_only=False):
    """Semi-smooth Newton matrix at ``field``.

    The row of an interior node differentiates the argmin pair recorded in
    ``evaluation``; boundary rows are identity rows.  With
    ``interior_only`` the interior-interior block is returned instead.
    """
    mesh = stencils.mesh
    n = len(stencils.nodes)
    k = np.arange(n)
    s1, s2 = evaluation.argmin_sdd()
    c1, c2 = jacobian_coefficients(s1, s2)
    S = stencils.sdd_matrix
    rows1 = (2 * evaluation.argmin) * n + k
    J = sp.diags(c1) @ S[rows1] + sp.diags(c2) @ S[rows1 + n]  # (n, N)
    J = J.tocsr()
    if interior_only:
        J = J[:, stencils.nodes].tocsr()
        J.sort_indices()
        return J
    N = mesh.n_vertices
    place = sp.csr_matrix((np.ones(n), (stencils.nodes, k)), shape=(N, n))
    nb = len(mesh.boundary)
    ident = sp.csr_matrix((np.ones(nb), (mesh.boundary, mesh.boundary)), shape=(N, N))
    full = (place @ J + ident).tocsr()
    full.sort_indices()
    return full


def _check_boundary(init, gb, mesh):
    diff = np.abs(init.values[mesh.boundary] - gb)
    if np.any(diff > 1e-12 * (1 + np.abs(gb))):
        raise InvalidArgument("initial field does not match the boundary data")


def newton_solve(
    problem,
    mesh,
    params,
    init,
    rtol=1e-8,
    max_iter=100,
    max_backtracks=30,
    stencils=None,
    forcing=None,
):
    """Damped semi-smooth Newton iteration.

    Stops once the lumped L2 norm of ``f - T[u]`` drops below ``rtol``
    times its initial value, or below a round-off floor of
    ``100 eps_mach (max f + max|g| / delta^2) |domain|^(1/2)``.  Each step takes the largest ``tau`` in
    ``1, 1/2, 1/4, ...`` that strictly decreases the residual.
    ``forcing`` overrides the interior values of ``f``.

    Returns ``(field, report)``.
    """
    t0 = time.perf_counter()
    if stencils is None:
        stencils = build_stencils(mesh, params)
    fI = _forcing(mesh, problem) if forcing is None else np.asarray(forcing, dtype=float)
    gb = _boundary_values(mesh, problem)
    _check_boundary(init, gb, mesh)
    u = init.values.copy()
    u[mesh.boundary] = gb
    mass = lumped_masses(mesh)[mesh.interior]

    def residual(values):
        ev = apply_operator(values, stencils)
        r = fI - ev.values
        return ev, r, float(np.sqrt(np.dot(mass, r * r)))

    report = NewtonReport()
    ev, r, norm = residual(u)
    report.residual_history.append(norm)
    floor = 100 * np.finfo(float).eps * (fI.max(initial=0.0) + np.abs(gb).max() / stencils.params.delta**2)
    target = max(rtol * norm, floor * math.sqrt(mesh.area()))
    I = mesh.interior
    while norm > target:
        if report.iterations >= max_iter:
            report.runtime = time.perf_counter() - t0
            raise NonConvergenceError(f"Newton: no convergence in {max_iter} iterations", report)
        J = assemble_jacobian(u, ev, stencils, interior_only=True)
        w = solve_sparse(J, r)
        tau = 1.0
        for _ in range(max_backtracks + 1):
            trial = u.copy()
            trial[I] += tau * w
            ev_t, r_t, norm_t = residual(trial)
            if norm_t < norm:
                break
            tau *= 0.5
        else:
            report.runtime = time.perf_counter() - t0
            raise NonConvergenceError(
                f"Newton: damping exhausted at iteration {report.iterations} "
                f"(residual {norm:.3e})",
                report,
            )
        u, ev, r, norm = trial, ev_t, r_t, norm_t
        report.iterations += 1
        report.damping_history.append(tau)
        report.residual_history.append(norm)
        log.debug("newton it=%d tau=%g residual=%.3e", report.iterations, tau, norm)
    report.converged = True
    out = NodalField(mesh, u)
    report.discretely_convex = is_discretely_convex(out, stencils)[0]
    report.runtime = time.perf_counter() - t0
    return out, report


def lower_convex_envelope(points, values, queries):
    """Evaluate the lower convex envelope of lifted points ``(points, values)`` at ``queries``."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    queries = np.atleast_2d(queries)
    center = points.mean(axis=0)
    zscale = max(np.abs(values).max(), 1e-300)
    lifted = np.column_stack([points - center, values / zscale])
    try:
        hull = ConvexHull(lifted)
        eq = hull.equations
    except QhullError:
        # all lifted points coplanar: the envelope is that plane
        A = np.column_stack([points - center, np.ones(len(points))])
        coef, *_ = np.linalg.lstsq(A, values, rcond=None)
        if np.abs(A @ coef - values).max() > 1e-9 * (1 + np.abs(values).max()):
            raise ConstructionError("convex hull of the lifted boundary data failed")
        return np.column_stack([queries - center, np.ones(len(queries))]) @ coef
    lower = eq[eq[:, 2] < -1e-12]
    q = queries - center
    z = -(lower[:, None, 0] * q[:, 0] + lower[:, None, 1] * q[:, 1] + lower[:, None, 3]) / lower[:, None, 2]
    return z.max(axis=0) * zscale


def hull_subsolution(mesh, problem, params=None, stencils=None, max_retries=8):
    """Discrete subsolution ``I_h q + envelope`` with ``q = c|x|^2/2``, ``c = ||f||^(1/2)``.

    The envelope is the lower convex hull of the boundary points lifted to
    ``g - q``; boundary nodes are finally reset to ``g`` (raising values
    there keeps both convexity and the subsolution property).  The
    inequality ``T[u] >= f`` is verified and ``c`` doubled on failure.
    """
    if stencils is None:
        if params is None:
            raise InvalidArgument("hull_subsolution needs params or stencils")
        stencils = build_stencils(mesh, params)
    fI = _forcing(mesh, problem)
    gb = _boundary_values(mesh, problem)
    c = math.sqrt(fI.max()) if len(fI) else 0.0
    X = mesh.vertices
    for _ in range(max_retries + 1):
        q = 0.5 * c * (X**2).sum(axis=1)
        u = q + lower_convex_envelope(X[mesh.boundary], gb - q[mesh.boundary], X)
        u[mesh.boundary] = gb
        ev = apply_operator(u, stencils)
        if np.all(ev.values >= fI - 1e-12 * (1 + fI)):
            return NodalField(mesh, u)
        c = 2 * c if c > 0 else 1.0
    raise ConstructionError("could not build a discrete subsolution")


def _node_blocks(stencils):
    """Per interior node: local columns and the dense rows of its second differences."""
    S = stencils.sdd_matrix
    n = len(stencils.nodes)
    npairs = stencils.n_pairs
    blocks = []
    for k in range(n):
        rows = S[np.arange(2 * npairs) * n + k]
        cols = np.unique(rows.indices)
        dense = rows[:, cols].toarray()
        centre = int(np.searchsorted(cols, stencils.nodes[k]))
        blocks.append((cols, dense, centre))
    return blocks


def _pair_value(a, b, t):
    best = math.inf
    for j in range(0, len(a), 2):
        s1 = a[j] + b[j] * t
        s2 = a[j + 1] + b[j + 1] * t
        v = (s1 if s1 < 0 else 0.0) + (s2 if s2 < 0 else 0.0)
        if s1 > 0 and s2 > 0:
            v = s1 * s2
        if v < best:
            best = v
    return best


def perron_solve(
    problem,
    mesh,
    params,
    sub,
    node_tol=None,
    max_sweeps=100000,
    stencils=None,
    callback=None,
):
    """Perron iteration: Gauss-Seidel sweeps of nodewise bisection.

    At every interior node (ascending id) the central value is raised until
    ``T[u](x_i) = f(x_i)``; this root is bracketed by the current value and
    ``max g``.  ``callback(sweep, values)`` is called after each sweep.
    """
    if stencils is None:
        stencils = build_stencils(mesh, params)
    fI = _forcing(mesh, problem)
    gb = _boundary_values(mesh, problem)
    _check_boundary(sub, gb, mesh)
    if node_tol is None:
        node_tol = 1e-10 * (1 + np.abs(gb).max())
    upper = float(gb.max())
    u = sub.values.copy()
    blocks = _node_blocks(stencils)
    slack = 1e-10 * (1 + np.abs(fI).max())
    for sweep in range(1, max_sweeps + 1):
        biggest = 0.0
        for k, i in enumerate(stencils.nodes):
            cols, dense, centre = blocks[k]
            ui = u[i]
            b = dense[:, centre]
            a = (dense @ u[cols] - b * ui).tolist()
            b = b.tolist()
            f = fI[k]
            lo, hi = ui, max(upper, ui)
            if _pair_value(a, b, lo) < f - slack:
                raise InvalidArgument(f"not a subsolution at node {i} (sweep {sweep})")
            if _pair_value(a, b, hi) > f + slack:
                raise InvalidArgument(f"Perron bracket failure at node {i}: T > f at max g")
            while hi - lo > 0.01 * node_tol:
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if _pair_value(a, b, mid) >= f:
                    lo = mid
                else:
                    hi = mid
            biggest = max(biggest, lo - ui)
            u[i] = lo
        if callback is not None:
            callback(sweep, u.copy())
        if biggest < node_tol:
            return NodalField(mesh, u)
    raise NonConvergenceError(
        f"Perron: no convergence in {max_sweeps} sweeps", NodalField(mesh, u)
    )
