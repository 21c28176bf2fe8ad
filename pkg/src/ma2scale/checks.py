"""Randomised property suites for the discrete operator.

Each suite draws seeded random configurations, keeps those satisfying the
hypotheses of the property, and counts violations of the conclusion.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fem import NodalField
from .operator import apply_operator, is_discretely_convex
from .solvers import assemble_jacobian


@dataclass
class SuiteResult:
    name: str
    trials: int = 0
    checked: int = 0
    violations: int = 0
    worst: float = float("-inf")
    details: list = field(default_factory=list)

    @property
    def passed(self):
        return self.checked > 0 and self.violations == 0


def random_convex_function(rng, scale=1.0):
    """Random convex function of (x, y): PSD quadratic + affine + max of planes + cone."""
    L = rng.normal(size=(2, 2))
    A = L @ L.T * rng.uniform(0.1, 2.0) * scale
    b = rng.normal(size=2)
    planes = rng.normal(size=(rng.integers(0, 4), 3)) * scale
    cone_w = rng.uniform(0, 1) * scale if rng.random() < 0.5 else 0.0
    cone_c = rng.uniform(0, 1, size=2)
    c0 = rng.normal()

    def phi(x, y):
        val = 0.5 * (A[0, 0] * x * x + 2 * A[0, 1] * x * y + A[1, 1] * y * y) + b[0] * x + b[1] * y + c0
        if len(planes):
            val = val + np.max(planes[:, 0, None] * x + planes[:, 1, None] * y + planes[:, 2, None], axis=0)
        return val + cone_w * np.hypot(x - cone_c[0], y - cone_c[1])

    return phi


def interior_barrier(mesh):
    """``I_h`` of ``(|x - c|^2 - R^2)/2`` with ``c`` the vertex centroid and ``R`` the covering radius."""
    X = mesh.vertices
    c = X.mean(axis=0)
    d2 = ((X - c) ** 2).sum(axis=1)
    return NodalField(mesh, 0.5 * (d2 - d2.max()))


def _interp(mesh, phi):
    X = mesh.vertices
    return phi(X[:, 0], X[:, 1])


def comparison_suite(stencils, n_pairs=200, seed=0, tol=1e-9):
    """Discrete comparison principle: boundary order + operator order imply nodal order."""
    rng = np.random.default_rng(seed)
    mesh = stencils.mesh
    B = mesh.boundary
    qh = interior_barrier(mesh).values
    res = SuiteResult("comparison")
    while res.checked < n_pairs and res.trials < 20 * n_pairs:
        res.trials += 1
        kind = res.trials % 3
        if kind == 0:
            # u = w + alpha*q_h + chi - max_boundary(chi)
            w = _interp(mesh, random_convex_function(rng))
            chi = _interp(mesh, random_convex_function(rng, scale=rng.uniform(0, 1)))
            u = w + rng.uniform(0, 2) * qh + chi - chi[B].max()
        elif kind == 1:
            # barrier against a flatter copy of itself
            s = rng.uniform(0.05, 1.0)
            u = qh.copy()
            w = s * qh + rng.uniform(0, 0.1)
        else:
            # barrier below an arbitrary convex field with a nonnegative operator
            w = _interp(mesh, random_convex_function(rng))
            a = rng.uniform(0.1, 3.0)
            u = a * qh + w - rng.uniform(0, 0.2)
        if np.any(u[B] > w[B]):
            continue
        Tu = apply_operator(u, stencils).values
        Tw = apply_operator(w, stencils).values
        if np.any(Tw < 0) or np.any(Tu < Tw):
            continue
        res.checked += 1
        excess = float((u - w).max())
        res.worst = max(res.worst, excess)
        if excess > tol:
            res.violations += 1
            res.details.append((res.trials, excess))
    return res


def monotonicity_suite(stencils, n_pairs=200, seed=0, tol=1e-10):
    """If ``u - w`` peaks at an interior node ``z`` then ``T[w](z) >= T[u](z)``."""
    rng = np.random.default_rng(seed)
    mesh = stencils.mesh
    interior_pos = {int(v): k for k, v in enumerate(stencils.nodes)}
    res = SuiteResult("monotonicity")
    while res.checked < n_pairs and res.trials < 50 * n_pairs:
        res.trials += 1
        base = random_convex_function(rng)
        u = _interp(mesh, base)
        w = u + _interp(mesh, random_convex_function(rng, scale=rng.uniform(0.2, 3)))
        w += rng.uniform(0, 0.3) * _interp(mesh, random_convex_function(rng))
        if not (is_discretely_convex(u, stencils)[0] and is_discretely_convex(w, stencils)[0]):
            continue
        z = int(np.argmax(u - w))
        if z not in interior_pos:
            continue
        k = interior_pos[z]
        Tu = apply_operator(u, stencils).values[k]
        Tw = apply_operator(w, stencils).values[k]
        res.checked += 1
        gap = float(Tu - Tw)
        res.worst = max(res.worst, gap)
        if gap > tol:
            res.violations += 1
            res.details.append((res.trials, z, gap))
    return res


def superadditivity_suite(stencils, n_fields=50, seed=0, tol=1e-9):
    """``T[u + q_h] >= T[u] + T[q_h]`` for discretely convex ``u``."""
    rng = np.random.default_rng(seed)
    mesh = stencils.mesh
    qh = interior_barrier(mesh).values
    Tq = apply_operator(qh, stencils).values
    res = SuiteResult("superadditivity")
    while res.checked < n_fields and res.trials < 10 * n_fields:
        res.trials += 1
        u = _interp(mesh, random_convex_function(rng))
        Tu = apply_operator(u, stencils).values
        Tsum = apply_operator(u + qh, stencils).values
        res.checked += 1
        gap = float((Tu + Tq - Tsum).max())
        res.worst = max(res.worst, gap)
        if gap > tol:
            res.violations += 1
    return res


def jacobian_check(field, stencils, seed=0, rtol=1e-5, eps=None):
    """Compare Jacobian rows with forward differences of the operator.

    Nodes where the perturbation changes the argmin pair or the sign of a
    second difference of that pair are excluded.  The error at a node is
    measured relative to ``sum_j |J_ij e_j|`` for the random direction ``e``.  Returns
    ``(fraction passing, n checked, n excluded)``.
    """
    rng = np.random.default_rng(seed)
    u = field.values if isinstance(field, NodalField) else np.asarray(field, dtype=float)
    ev = apply_operator(u, stencils)
    J = assemble_jacobian(u, ev, stencils)
    e = rng.normal(size=len(u))
    e[stencils.mesh.boundary] = 0.0
    if eps is None:
        # balances O(eps) truncation against O(1e-16/eps) rounding
        eps = 1e-8 * max(1.0, np.abs(u).max()) * stencils.params.delta**2
    evp = apply_operator(u + eps * e, stencils)
    fd = (evp.values - ev.values) / eps
    lin = (J @ e)[stencils.nodes]
    k = np.arange(len(stencils.nodes))
    s_old = ev.sdd[ev.argmin, :, k]
    s_new = evp.sdd[ev.argmin, :, k]
    same = (evp.argmin == ev.argmin) & np.all(np.sign(s_old) == np.sign(s_new), axis=1)
    # relative to the size of the row's terms, so cancellation in J e is harmless
    scale = (abs(J) @ np.abs(e))[stencils.nodes]
    ok = np.abs(fd - lin) <= rtol * np.maximum(scale, 1e-300)
    n = int(same.sum())
    frac = float(ok[same].mean()) if n else 0.0
    return frac, n, int((~same).sum())
