"""Conforming triangulations of convex polygons.

A :class:`TriangleMesh` stores vertex coordinates, counterclockwise
triangles and a boundary loop.  Point location goes through a background
grid of roughly ``1/h`` cells per side; every cell keeps the ids of the
triangles whose bounding boxes overlap it, so a query only tests a handful
of candidates.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import GeometryError, InvalidArgument, OutOfDomainError

#: Barycentric weights down to ``-LOCATION_TOL`` are accepted.
LOCATION_TOL = 1e-10

INTERIOR = 0
BOUNDARY = 1


@dataclass(frozen=True)
class BarycentricHit:
    triangle: int
    weights: np.ndarray


@dataclass(frozen=True)
class PointHits:
    """Vectorised result of :meth:`TriangleMesh.locate_points`."""

    triangles: np.ndarray  # (q,)
    vertices: np.ndarray  # (q, 3)
    weights: np.ndarray  # (q, 3)

    def __getitem__(self, k):
        return BarycentricHit(int(self.triangles[k]), self.weights[k].copy())


class _Locator:
    def __init__(self, vertices, triangles, h):
        lo = vertices.min(axis=0)
        hi = vertices.max(axis=0)
        extent = np.maximum(hi - lo, 1e-300)
        ncell = np.maximum(np.ceil(extent / h).astype(int), 1)
        self.lo = lo
        self.ncell = ncell
        self.cell = extent / ncell

        pts = vertices[triangles]  # (m, 3, 2)
        pad = LOCATION_TOL * max(extent.max(), 1.0)
        tmin = (pts.min(axis=1) - pad - lo) / self.cell
        tmax = (pts.max(axis=1) + pad - lo) / self.cell
        i0 = np.clip(np.floor(tmin).astype(int), 0, ncell - 1)
        i1 = np.clip(np.floor(tmax).astype(int), 0, ncell - 1)

        buckets = [[] for _ in range(int(ncell[0] * ncell[1]))]
        for t in range(len(triangles)):
            for cx in range(i0[t, 0], i1[t, 0] + 1):
                for cy in range(i0[t, 1], i1[t, 1] + 1):
                    buckets[cy * ncell[0] + cx].append(t)
        width = max(len(b) for b in buckets)
        table = np.full((len(buckets), width), -1, dtype=np.int64)
        for c, b in enumerate(buckets):
            table[c, : len(b)] = b  # ascending ids: first hit is the lowest
        self.table = table

        v0 = pts[:, 0, :]
        B = np.stack([pts[:, 1, :] - v0, pts[:, 2, :] - v0], axis=2)  # (m, 2, 2)
        self.origin = v0
        self.inverse = np.linalg.inv(B)

    def cells_of(self, p):
        c = np.floor((p - self.lo) / self.cell).astype(int)
        c = np.clip(c, 0, self.ncell - 1)
        return c[:, 1] * self.ncell[0] + c[:, 0]

    def barycentric(self, tri, p):
        d = p - self.origin[tri]
        l12 = np.einsum("...ij,...j->...i", self.inverse[tri], d)
        l0 = 1.0 - l12.sum(axis=-1)
        return np.concatenate([l0[..., None], l12], axis=-1)


@dataclass(eq=False)
class TriangleMesh:
    """Triangulation of a convex polygon.

    Parameters
    ----------
    vertices : (n, 2) array
    triangles : (m, 3) int array, counterclockwise
    h : float, optional
        Mesh size.  Defaults to the longest edge length.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    h: float = None
    node_class: np.ndarray = field(init=False)
    polygon: np.ndarray = field(init=False)
    edges: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if not np.all(np.isfinite(self.vertices)):
            raise InvalidArgument("vertex coordinates must be finite")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise InvalidArgument("triangles must be an (m, 3) array")
        area = self.signed_areas()
        if np.any(area <= 0):
            raise GeometryError(
                f"{np.count_nonzero(area <= 0)} triangle(s) with non-positive signed area"
            )
        self.edges, boundary_edges = _edges(self.triangles)
        if self.h is None:
            d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
            self.h = float(np.sqrt((d**2).sum(axis=1)).max())
        self.polygon = _boundary_loop(boundary_edges, self.vertices)
        node_class = np.full(len(self.vertices), INTERIOR, dtype=np.int8)
        node_class[self.polygon] = BOUNDARY
        self.node_class = node_class
        self.interior = np.flatnonzero(node_class == INTERIOR)
        self.boundary = np.flatnonzero(node_class == BOUNDARY)
        self._locator = _Locator(self.vertices, self.triangles, self.h)

    # -- basic geometry -------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    def signed_areas(self):
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def area(self):
        return float(self.signed_areas().sum())

    def shape_ratios(self):
        """Longest edge over inradius, per triangle."""
        p = self.vertices[self.triangles]
        lengths = np.stack(
            [np.linalg.norm(p[:, (k + 1) % 3] - p[:, k], axis=1) for k in range(3)], axis=1
        )
        inradius = 2 * self.signed_areas() / lengths.sum(axis=1)
        return lengths.max(axis=1) / inradius

    def is_convex(self, tol=1e-12):
        loop = self.vertices[self.polygon]
        a = np.roll(loop, -1, axis=0) - loop
        b = np.roll(loop, -2, axis=0) - np.roll(loop, -1, axis=0)
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        return bool(np.all(cross >= -tol * self.h**2))

    # -- queries ---------------------------------------------------------

    def locate_points(self, points, tol=LOCATION_TOL):
        """Locate many points at once.

        Returns a :class:`PointHits`; raises :class:`OutOfDomainError` if
        any point is outside the closure of the mesh by more than ``tol``.
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        loc = self._locator
        cand = loc.table[loc.cells_of(p)]  # (q, w)
        valid = cand >= 0
        safe = np.where(valid, cand, 0)
        lam = loc.barycentric(safe, p[:, None, :])  # (q, w, 3)
        inside = valid & (lam.min(axis=2) >= -tol)
        found = inside.any(axis=1)
        if not np.all(found):
            bad = p[~found][0]
            raise OutOfDomainError(f"point ({bad[0]!r}, {bad[1]!r}) is outside the mesh")
        k = np.argmax(inside, axis=1)
        rows = np.arange(len(p))
        tri = cand[rows, k]
        w = np.clip(lam[rows, k], 0.0, None)
        w /= w.sum(axis=1, keepdims=True)
        return PointHits(tri, self.triangles[tri], w)

    def locate_point(self, p, tol=LOCATION_TOL):
        return self.locate_points(np.asarray(p, dtype=float)[None, :], tol)[0]

    def boundary_distances(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.vertices[self.polygon]
        b = np.roll(a, -1, axis=0)
        ab = b - a
        ap = p[:, None, :] - a[None, :, :]
        L2 = (ab * ab).sum(axis=1)
        t = (ap * ab).sum(axis=2) / L2
        # perpendicular distance via the cross product is exactly 0 on an edge
        perp = np.abs(ab[None, :, 0] * ap[..., 1] - ab[None, :, 1] * ap[..., 0]) / np.sqrt(L2)
        da = np.hypot(ap[..., 0], ap[..., 1])
        bp = p[:, None, :] - b[None, :, :]
        db = np.hypot(bp[..., 0], bp[..., 1])
        d = np.where(t < 0, da, np.where(t > 1, db, perp))
        return d.min(axis=1)

    def boundary_distance(self, p):
        return float(self.boundary_distances(np.asarray(p, dtype=float)[None, :])[0])

    # -- io ----------------------------------------------------------------

    def dump(self, directory):
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "vertices.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "x", "y", "class"])
            for i, (x, y) in enumerate(self.vertices):
                cls = "boundary" if self.node_class[i] == BOUNDARY else "interior"
                w.writerow([i, f"{x:.17g}", f"{y:.17g}", cls])
        with open(os.path.join(directory, "triangles.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "v0", "v1", "v2"])
            for t, (a, b, c) in enumerate(self.triangles):
                w.writerow([t, a, b, c])

    @classmethod
    def load(cls, directory, h=None):
        with open(os.path.join(directory, "vertices.csv"), newline="") as fh:
            rows = list(csv.DictReader(fh))
        vertices = np.array([[float(r["x"]), float(r["y"])] for r in rows])
        with open(os.path.join(directory, "triangles.csv"), newline="") as fh:
            tris = np.array([[int(r["v0"]), int(r["v1"]), int(r["v2"])] for r in csv.DictReader(fh)])
        mesh = cls(vertices, tris, h=h)
        stored = np.array([BOUNDARY if r["class"] == "boundary" else INTERIOR for r in rows])
        if not np.array_equal(stored, mesh.node_class):
            raise GeometryError("stored node classes disagree with the triangulation")
        return mesh


def _edges(triangles):
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(e, axis=1)
    uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    if np.any(counts > 2):
        raise GeometryError("non-manifold edge: shared by more than two triangles")
    once = counts[inverse.ravel()] == 1
    return uniq, e[once]  # boundary edges keep their ccw orientation


def _boundary_loop(boundary_edges, vertices):
    nxt = {}
    for a, b in boundary_edges:
        if a in nxt:
            raise GeometryError("boundary is not a single simple loop")
        nxt[int(a)] = int(b)
    start = min(nxt, key=lambda v: (vertices[v, 1], vertices[v, 0]))
    loop = [start]
    while True:
        v = nxt[loop[-1]]
        if v == start:
            break
        loop.append(v)
        if len(loop) > len(nxt):
            raise GeometryError("boundary is not a single simple loop")
    if len(loop) != len(nxt):
        raise GeometryError("boundary has more than one component")
    return np.array(loop, dtype=np.int64)


def build_unit_square_mesh(n):
    """Uniform lattice on [0, 1]^2 with ``n`` cells per side.

    Every cell is split by its lower-left to upper-right diagonal.
    """
    if int(n) != n or n < 2:
        raise InvalidArgument(f"need n >= 2 subdivisions, got {n!r}")
    n = int(n)
    s = np.arange(n + 1) / n
    X, Y = np.meshgrid(s, s)  # vertex id = j*(n+1) + i
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    a = (j * (n + 1) + i).ravel()
    b = a + 1
    c = a + n + 2
    d = a + n + 1
    triangles = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriangleMesh(vertices, triangles, h=math.sqrt(2.0) / n)


def build_polygon_mesh(corners, levels=0):
    """Mesh a convex polygon by a centroid fan refined ``levels`` times.

    ``corners`` must be listed counterclockwise.
    """
    corners = np.asarray(corners, dtype=float)
    if len(corners) < 3:
        raise InvalidArgument("a polygon needs at least three corners")
    e = np.roll(corners, -1, axis=0) - corners
    turn = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    if np.any(turn <= 0):
        raise InvalidArgument("polygon corners must be convex and counterclockwise")
    c = corners.mean(axis=0)
    vertices = np.vstack([corners, c])
    k = len(corners)
    triangles = np.array([[i, (i + 1) % k, k] for i in range(k)])
    mesh = TriangleMesh(vertices, triangles)
    if not mesh.is_convex():
        raise InvalidArgument("polygon corners must be convex and counterclockwise")
    for _ in range(levels):
        mesh, _ = refine_uniform(mesh)
    return mesh


def refine_uniform(mesh):
    """Red refinement: split every triangle into four through edge midpoints.

    Returns the fine mesh and the prolongation matrix (fine x coarse) that
    maps coarse nodal values to the fine P1 interpolant.
    """
    nv = mesh.n_vertices
    edges = mesh.edges
    mid_index = {(int(a), int(b)): nv + k for k, (a, b) in enumerate(edges)}
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])

    def m(a, b):
        return mid_index[(a, b) if a < b else (b, a)]

    tris = []
    for a, b, c in mesh.triangles.tolist():
        ab, bc, ca = m(a, b), m(b, c), m(c, a)
        tris += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
    fine = TriangleMesh(vertices, np.array(tris), h=mesh.h / 2)

    ne = len(edges)
    rows = np.concatenate([np.arange(nv), np.repeat(nv + np.arange(ne), 2)])
    cols = np.concatenate([np.arange(nv), edges.ravel()])
    vals = np.concatenate([np.ones(nv), np.full(2 * ne, 0.5)])
    P = sp.csr_matrix((vals, (rows, cols)), shape=(len(vertices), nv))
    return fine, P
