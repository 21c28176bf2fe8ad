"""Continuous piecewise linear functions on a :class:`TriangleMesh`."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, InvalidData
from .mesh import TriangleMesh


@dataclass(eq=False)
class NodalField:
    """A P1 function stored by its nodal values."""

    mesh: TriangleMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_vertices,):
            raise InvalidData(
                f"expected {self.mesh.n_vertices} nodal values, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidData("nodal values must be finite")

    def copy(self):
        return NodalField(self.mesh, self.values.copy())

    def __call__(self, points):
        """Evaluate at arbitrary points of the domain."""
        hits = self.mesh.locate_points(points)
        return (hits.weights * self.values[hits.vertices]).sum(axis=1)

    def dump(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "x", "y", "value"])
            for i, ((x, y), v) in enumerate(zip(self.mesh.vertices, self.values)):
                w.writerow([i, f"{x:.17g}", f"{y:.17g}", f"{v:.17g}"])


def sample(g, points):
    """Call a vectorised ``g(x, y)`` on an (n, 2) array of points."""
    points = np.asarray(points, dtype=float)
    with np.errstate(all="ignore"):
        out = g(points[:, 0], points[:, 1])
    return np.broadcast_to(np.asarray(out, dtype=float), (len(points),)).copy()


def interpolate(mesh, g):
    """Lagrange interpolant of ``g``."""
    values = sample(g, mesh.vertices)
    if not np.all(np.isfinite(values)):
        bad = np.flatnonzero(~np.isfinite(values))[0]
        raise InvalidData(f"g is not finite at vertex {bad} {tuple(mesh.vertices[bad])}")
    return NodalField(mesh, values)


def evaluate(field, hit):
    tri = field.mesh.triangles[hit.triangle]
    return float(np.dot(hit.weights, field.values[tri]))


def lumped_masses(mesh):
    """One third of the area of the triangle star of every vertex."""
    area = mesh.signed_areas()
    m = np.zeros(mesh.n_vertices)
    np.add.at(m, mesh.triangles.ravel(), np.repeat(area / 3.0, 3))
    return m


def lumped_l2_norm(mesh, residual):
    """Mass-lumped L2 norm of a nodal residual.

    ``residual`` holds one value per interior node, or one per vertex.
    """
    r = np.asarray(residual, dtype=float)
    m = lumped_masses(mesh)
    if len(r) == len(mesh.interior) and len(r) != mesh.n_vertices:
        m = m[mesh.interior]
    elif len(r) != mesh.n_vertices:
        raise InvalidData(f"residual length {len(r)} matches neither interior nor all nodes")
    return float(np.sqrt(np.dot(m, r * r)))


def linf_node_error(field, exact):
    return float(np.abs(field.values - sample(exact, field.mesh.vertices)).max())


def stiffness_matrix(mesh):
    """Full P1 stiffness matrix (no boundary conditions)."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas()
    if np.any(area <= 1e-14 * mesh.h**2):
        raise AssemblyError("degenerate triangle in stiffness assembly")
    # gradients of the hat functions: rotate opposite edge by 90 degrees
    opp = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grad = np.stack([-opp[..., 1], opp[..., 0]], axis=-1) / (2 * area[:, None, None])
    local = np.einsum("tik,tjk->tij", grad, grad) * area[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    K = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_vertices,) * 2)
    return K.tocsr()


def assemble_p1_poisson(mesh, rhs, bc):
    """Galerkin system for ``Δu = rhs`` with ``u = bc`` on the boundary.

    Returns ``(A, b)`` over the interior unknowns: ``A`` is the stiffness
    matrix with Dirichlet rows and columns eliminated (SPD) and ``b``
    contains the vertex-rule load plus the boundary lifting.  ``rhs`` and
    ``bc`` are callables or precomputed arrays (interior and boundary
    values respectively).
    """
    K = stiffness_matrix(mesh)
    I, B = mesh.interior, mesh.boundary
    s = rhs if isinstance(rhs, np.ndarray) else sample(rhs, mesh.vertices[I])
    gb = bc if isinstance(bc, np.ndarray) else sample(bc, mesh.vertices[B])
    m = lumped_masses(mesh)[I]
    A = K[I][:, I].tocsr()
    A.sort_indices()
    # weak form of -Δu = -rhs
    b = -m * s - K[I][:, B] @ gb
    return A, b


def dump_fields(path, mesh, columns):
    """Write several nodal columns in one CSV (node, x, y, *columns)."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    names = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x", "y", *names])
        for i, (x, y) in enumerate(mesh.vertices):
            w.writerow([i, f"{x:.17g}", f"{y:.17g}", *(f"{columns[c][i]:.17g}" for c in names)])
