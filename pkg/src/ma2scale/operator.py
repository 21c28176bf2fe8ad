"""Two-scale discrete Monge-Ampère operator.

At an interior node ``x_i`` the centred second difference along ``v`` uses
the points ``x_i +- rho_i*delta*v``, where ``rho_i = min(1, dist(x_i, boundary)/delta)``
keeps the stencil inside the (convex) domain.  The operator is

    T[u](x_i) = min over pairs (v, v_perp) of  s(v)^+ s(v_perp)^+ - s(v)^- - s(v_perp)^-

with ``s`` the second differences.  All second differences of a field are
one sparse mat-vec with the precomputed :attr:`StencilTable.sdd_matrix`.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import GeometryError, InvalidArgument, OutOfDomainError
from .fem import NodalField, sample
from .parallel import worker_count

NEGATIVE, ZERO, POSITIVE = -1, 0, 1
CLASS_NAMES = {NEGATIVE: "negative", ZERO: "zero", POSITIVE: "positive"}


@dataclass(frozen=True)
class TwoScaleParams:
    h: float
    delta: float
    directions: object  # DirectionSet

    def __post_init__(self):
        if not 0 < self.h <= self.delta:
            raise InvalidArgument(f"need 0 < h <= delta, got h={self.h!r}, delta={self.delta!r}")


@dataclass(eq=False)
class StencilTable:
    """Located stencil points for every interior node and direction.

    ``vertices``/``weights`` have shape ``(n_pairs, 4, n_interior, 3)``; the
    second axis runs over ``x+rho*delta*v, x-rho*delta*v, x+rho*delta*v_perp,
    x-rho*delta*v_perp``.  ``sdd_matrix`` maps nodal values to the stacked
    second differences, row ``(2*j + c)*n_interior + k`` for pair ``j``,
    component ``c`` (0 for ``v``, 1 for ``v_perp``) and interior node ``k``.
    """

    mesh: object
    params: TwoScaleParams
    nodes: np.ndarray
    rho: np.ndarray
    vertices: np.ndarray
    weights: np.ndarray
    sdd_matrix: sp.csr_matrix

    @property
    def n_pairs(self):
        return self.vertices.shape[0]

    @property
    def step(self):
        """``rho_i * delta`` per interior node."""
        return self.rho * self.params.delta

    def points(self):
        x = self.mesh.vertices[self.nodes]
        return _stencil_points(x, self.step, self.params.directions)


@dataclass(eq=False)
class OperatorEval:
    """Operator values at the interior nodes together with the minimising pair."""

    values: np.ndarray  # (n_interior,)
    argmin: np.ndarray  # (n_interior,)
    sdd: np.ndarray  # (n_pairs, 2, n_interior)

    def argmin_sdd(self):
        k = np.arange(len(self.argmin))
        return self.sdd[self.argmin, 0, k], self.sdd[self.argmin, 1, k]


def _stencil_points(x, step, dirs):
    # (n_pairs, 4, n, 2)
    offs = np.stack([dirs.v, -dirs.v, dirs.v_perp, -dirs.v_perp], axis=1)
    return x[None, None, :, :] + step[None, None, :, None] * offs[:, :, None, :]


def build_stencils(mesh, params):
    """Compute ``rho`` and locate all ``4 * n_pairs`` stencil points of every interior node."""
    nodes = mesh.interior
    x = mesh.vertices[nodes]
    delta = params.delta
    rho = np.minimum(1.0, mesh.boundary_distances(x) / delta)
    if np.any(rho <= 0):
        raise GeometryError("interior node on the boundary")
    pts = _stencil_points(x, rho * delta, params.directions)
    shape = pts.shape[:3]
    flat = pts.reshape(-1, 2)

    chunks = np.array_split(np.arange(len(flat)), max(1, worker_count()))
    chunks = [c for c in chunks if len(c)]
    try:
        if len(chunks) > 1:
            with ThreadPoolExecutor(len(chunks)) as ex:
                parts = list(ex.map(lambda c: mesh.locate_points(flat[c]), chunks))
        else:
            parts = [mesh.locate_points(flat)]
    except OutOfDomainError as exc:
        raise GeometryError(f"stencil point location failed: {exc}") from exc
    verts = np.concatenate([p.vertices for p in parts]).reshape(*shape, 3)
    wts = np.concatenate([p.weights for p in parts]).reshape(*shape, 3)

    n_pairs, _, n = shape
    scale = 1.0 / (rho * delta) ** 2
    rows, cols, vals = [], [], []
    for j in range(n_pairs):
        for c in range(2):
            r = (2 * j + c) * n + np.arange(n)
            for side in (2 * c, 2 * c + 1):
                rows.append(np.repeat(r, 3))
                cols.append(verts[j, side].ravel())
                vals.append((wts[j, side] * scale[:, None]).ravel())
            rows.append(r)
            cols.append(nodes)
            vals.append(-2.0 * scale)
    S = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * n_pairs * n, mesh.n_vertices),
    ).tocsr()
    S.sum_duplicates()
    S.sort_indices()
    return StencilTable(mesh, params, nodes, rho, verts, wts, S)


def _values(field):
    return field.values if isinstance(field, NodalField) else np.asarray(field, dtype=float)


def second_difference(field, stencils, node, pair, component=0):
    """Second difference at global vertex ``node`` along ``v`` (component 0) or ``v_perp`` (1) of ``pair``.

    Evaluated directly from the barycentric data, independently of the
    assembled matrix.
    """
    u = _values(field)
    k = np.searchsorted(stencils.nodes, node)
    if k >= len(stencils.nodes) or stencils.nodes[k] != node:
        raise InvalidArgument(f"vertex {node} is not an interior node")
    plus = np.dot(stencils.weights[pair, 2 * component, k], u[stencils.vertices[pair, 2 * component, k]])
    minus = np.dot(
        stencils.weights[pair, 2 * component + 1, k], u[stencils.vertices[pair, 2 * component + 1, k]]
    )
    return float((plus - 2 * u[node] + minus) / stencils.step[k] ** 2)


def all_second_differences(field, stencils):
    """Second differences of ``field``, shape ``(n_pairs, 2, n_interior)``."""
    u = _values(field)
    return (stencils.sdd_matrix @ u).reshape(stencils.n_pairs, 2, -1)


def combine(s1, s2):
    """``s1^+ s2^+ - s1^- - s2^-`` elementwise."""
    return np.maximum(s1, 0) * np.maximum(s2, 0) + np.minimum(s1, 0) + np.minimum(s2, 0)


def apply_operator(field, stencils):
    sdd = all_second_differences(field, stencils)
    per_pair = combine(sdd[:, 0], sdd[:, 1])  # (n_pairs, n)
    argmin = np.argmin(per_pair, axis=0)  # first minimiser on ties
    values = per_pair[argmin, np.arange(per_pair.shape[1])]
    return OperatorEval(values, argmin, sdd)


def convexity_tolerance(field, stencils):
    u = _values(field)
    return 1e-9 * np.abs(u).max() / stencils.params.delta**2


def is_discretely_convex(field, stencils, tol=None):
    """Check all second differences for nonnegativity.

    Returns ``(ok, violation)`` where ``violation`` is ``None`` or
    ``(vertex id, pair index, component)`` of the most negative difference.
    """
    sdd = all_second_differences(field, stencils)
    if tol is None:
        tol = convexity_tolerance(field, stencils)
    if sdd.size == 0 or sdd.min() >= -tol:
        return True, None
    j, c, k = np.unravel_index(np.argmin(sdd), sdd.shape)
    return False, (int(stencils.nodes[k]), int(j), int(c))


def truncation_error_map(field, f, stencils, eps=1e-6):
    """Classify interior nodes by the sign of ``f - T[field]``.

    Returns ``(classes, residual)``; classes use :data:`NEGATIVE`,
    :data:`ZERO`, :data:`POSITIVE`.
    """
    T = apply_operator(field, stencils).values
    fv = f if isinstance(f, np.ndarray) else sample(f, stencils.mesh.vertices[stencils.nodes])
    r = fv - T
    classes = np.where(r < -eps, NEGATIVE, np.where(r > eps, POSITIVE, ZERO)).astype(np.int8)
    return classes, r


def interior_region(stencils):
    """Mask of interior nodes at distance at least ``delta`` from the boundary."""
    return stencils.rho >= 1.0
