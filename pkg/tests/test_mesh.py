import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ma2scale.errors import InvalidArgument, OutOfDomainError
from ma2scale.fem import interpolate
from ma2scale.mesh import (
    BOUNDARY,
    INTERIOR,
    TriangleMesh,
    build_polygon_mesh,
    build_unit_square_mesh,
    refine_uniform,
)


def test_n2_counts():
    m = build_unit_square_mesh(2)
    assert m.n_vertices == 9
    assert len(m.triangles) == 8
    assert list(m.interior) == [4]
    np.testing.assert_array_equal(m.vertices[4], [0.5, 0.5])


def test_n32_vertex_count_matches_table():
    assert build_unit_square_mesh(32).n_vertices == 1089


def test_n4_classification():
    m = build_unit_square_mesh(4)
    assert len(m.boundary) == 16
    assert len(m.interior) == 9


def test_invalid_n():
    with pytest.raises(InvalidArgument):
        build_unit_square_mesh(1)


def test_mesh_invariants():
    m = build_unit_square_mesh(6)
    assert np.all(m.signed_areas() > 0)
    assert m.is_convex()
    assert m.h == math.sqrt(2) / 6
    assert m.shape_ratios().max() < 5.0
    X = m.vertices
    on_edge = (X == 0).any(axis=1) | (X == 1).any(axis=1)
    np.testing.assert_array_equal(m.node_class == BOUNDARY, on_edge)
    assert math.isclose(m.area(), 1.0)


def _tri_set(mesh):
    return {frozenset(map(tuple, mesh.vertices[t].round(12))) for t in mesh.triangles}


def test_refine_n2_equals_n4():
    fine, _ = refine_uniform(build_unit_square_mesh(2))
    ref = build_unit_square_mesh(4)
    assert sorted(map(tuple, fine.vertices)) == sorted(map(tuple, ref.vertices))
    assert _tri_set(fine) == _tri_set(ref)
    assert fine.h == ref.h


def test_prolongation_reproduces_constants_and_linears():
    coarse = build_unit_square_mesh(3)
    fine, P = refine_uniform(coarse)
    np.testing.assert_allclose(P @ np.ones(coarse.n_vertices), 1.0, rtol=0, atol=1e-15)
    lin = interpolate(coarse, lambda x, y: x + y).values
    np.testing.assert_allclose(P @ lin, fine.vertices.sum(axis=1), rtol=0, atol=1e-14)


def test_refine_preserves_structure():
    m = build_polygon_mesh([(0, 0), (2, 0), (2.5, 1), (1, 2), (-0.5, 1)], levels=2)
    fine, _ = refine_uniform(m)
    assert fine.is_convex()
    assert fine.h == m.h / 2
    assert math.isclose(fine.area(), m.area())
    # boundary nodes of the fine mesh are the coarse ones plus boundary-edge midpoints
    assert len(fine.boundary) == 2 * len(m.boundary)
    assert set(m.boundary) <= set(fine.boundary)


def test_locate_vertex_and_centroid():
    m = build_unit_square_mesh(4)
    hit = m.locate_point(m.vertices[7])
    assert sorted(hit.weights.round(14)) == [0.0, 0.0, 1.0]
    assert m.triangles[hit.triangle][np.argmax(hit.weights)] == 7
    t = 13
    hit = m.locate_point(m.vertices[m.triangles[t]].mean(axis=0))
    assert hit.triangle == t
    np.testing.assert_allclose(hit.weights, 1 / 3, atol=1e-14)


def _brute_force(mesh, p):
    # independent scan with an exact 2x2 solve per triangle
    for t, tri in enumerate(mesh.triangles):
        a, b, c = mesh.vertices[tri]
        lam = np.linalg.solve(np.column_stack([b - a, c - a]), np.asarray(p) - a)
        w = np.array([1 - lam.sum(), lam[0], lam[1]])
        if w.min() >= -1e-12:
            return t, w


def test_locate_generic_point_against_brute_force():
    m = build_unit_square_mesh(2)
    t, w = _brute_force(m, (0.3, 0.1))
    # frozen from the scan: lower-left triangle (0,0),(0.5,0),(0.5,0.5)
    assert t == 0
    np.testing.assert_allclose(w, [0.4, 0.4, 0.2], atol=1e-15)
    hit = m.locate_point((0.3, 0.1))
    assert hit.triangle == t
    np.testing.assert_allclose(hit.weights, w, atol=1e-14)


def test_locate_edge_tie_breaks_to_lowest_id():
    m = build_unit_square_mesh(2)
    # on the diagonal shared by triangles 0 and 4
    hit = m.locate_point((0.25, 0.25))
    containing = [t for t in range(len(m.triangles)) if _contains(m, t, (0.25, 0.25))]
    assert hit.triangle == min(containing)


def _contains(m, t, p):
    a, b, c = m.vertices[m.triangles[t]]
    lam = np.linalg.solve(np.column_stack([b - a, c - a]), np.asarray(p) - a)
    return min(1 - lam.sum(), *lam) >= -1e-12


def test_locate_outside_raises():
    m = build_unit_square_mesh(4)
    with pytest.raises(OutOfDomainError):
        m.locate_point((1.1, 0.5))
    # within tolerance is accepted
    m.locate_point((1 + 1e-13, 0.5))


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_locate_reconstructs_point(x, y):
    m = _M
    hit = m.locate_point((x, y))
    assert abs(hit.weights.sum() - 1) <= 1e-12
    assert hit.weights.min() >= 0
    rec = hit.weights @ m.vertices[m.triangles[hit.triangle]]
    np.testing.assert_allclose(rec, (x, y), atol=1e-12)


_M = build_unit_square_mesh(7)


@pytest.mark.parametrize(
    "p, d", [((0.5, 0.5), 0.5), ((0.1, 0.5), 0.1), ((0.25, 0.125), 0.125)]
)
def test_boundary_distance(p, d):
    m = build_unit_square_mesh(4)
    assert math.isclose(m.boundary_distance(p), d, abs_tol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1, allow_subnormal=False), st.floats(0, 1, allow_subnormal=False))
def test_boundary_distance_zero_iff_on_boundary(x, y):
    d = _M.boundary_distance((x, y))
    on = min(x, y, 1 - x, 1 - y) == 0
    assert (d == 0) == on
    assert math.isclose(d, min(x, y, 1 - x, 1 - y), abs_tol=1e-15)


def test_csv_roundtrip(tmp_path):
    m = build_polygon_mesh([(0, 0), (1, 0), (0.5, 1)], levels=2)
    m.dump(tmp_path)
    header = (tmp_path / "vertices.csv").read_text().splitlines()[0]
    assert header == "id,x,y,class"
    m2 = TriangleMesh.load(tmp_path)
    np.testing.assert_array_equal(m.vertices, m2.vertices)
    np.testing.assert_array_equal(m.triangles, m2.triangles)
    np.testing.assert_array_equal(m.node_class, m2.node_class)


def test_nonconvex_polygon_rejected():
    with pytest.raises(InvalidArgument):
        build_polygon_mesh([(0, 0), (2, 0), (1, 0.2), (2, 2), (0, 2)])
