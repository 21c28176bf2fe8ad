import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ma2scale.errors import InvalidData
from ma2scale.fem import (
    NodalField,
    assemble_p1_poisson,
    evaluate,
    interpolate,
    linf_node_error,
    lumped_l2_norm,
    lumped_masses,
    stiffness_matrix,
)
from ma2scale.mesh import build_unit_square_mesh
from ma2scale.sparse import solve_sparse


def half_r2(x, y):
    return 0.5 * (x * x + y * y)


def test_interpolant_at_edge_midpoint():
    m = build_unit_square_mesh(2)
    u = interpolate(m, half_r2)
    hit = m.locate_point((0.25, 0.0))
    # average of 0 and 0.125
    assert evaluate(u, hit) == pytest.approx(0.0625, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
    st.floats(0, 1), st.floats(0, 1),
)
def test_interpolation_exact_on_affine(a, b, c, x, y):
    m = _M
    u = interpolate(m, lambda X, Y: a * X + b * Y + c)
    assert u((x, y))[0] == pytest.approx(a * x + b * y + c, abs=1e-12)


_M = build_unit_square_mesh(5)


def test_nodal_field_validation():
    m = build_unit_square_mesh(2)
    with pytest.raises(InvalidData):
        NodalField(m, np.zeros(8))
    with pytest.raises(InvalidData):
        NodalField(m, np.r_[np.zeros(8), np.nan])
    with pytest.raises(InvalidData):
        interpolate(m, lambda x, y: 1 / (x - 0.5))


def test_lumped_mass_centre_node():
    m = build_unit_square_mesh(2)
    # six triangles of area 1/8 meet at the centre
    assert lumped_masses(m)[4] == pytest.approx(0.25, abs=1e-15)
    assert lumped_l2_norm(m, np.array([1.0])) == pytest.approx(0.5, abs=1e-15)
    assert lumped_masses(m).sum() == pytest.approx(1.0)


def test_lumped_norm_rejects_bad_length():
    with pytest.raises(InvalidData):
        lumped_l2_norm(build_unit_square_mesh(2), np.ones(3))


def test_stiffness_rows_sum_to_zero():
    K = stiffness_matrix(build_unit_square_mesh(4))
    np.testing.assert_allclose(K @ np.ones(K.shape[0]), 0, atol=1e-13)
    assert abs(K - K.T).max() < 1e-15


def _dense_poisson(mesh, rhs, bc):
    # element-by-element dense assembly as an independent oracle
    N = mesh.n_vertices
    K = np.zeros((N, N))
    for tri in mesh.triangles:
        P = mesh.vertices[tri]
        M = np.column_stack([np.ones(3), P])
        G = np.linalg.inv(M)[1:]  # gradients of barycentrics
        area = 0.5 * abs(np.linalg.det(M))
        K[np.ix_(tri, tri)] += area * G.T @ G
    m = np.zeros(N)
    for tri in mesh.triangles:
        M = np.column_stack([np.ones(3), mesh.vertices[tri]])
        m[tri] += 0.5 * abs(np.linalg.det(M)) / 3
    I, B = mesh.interior, mesh.boundary
    X = mesh.vertices
    g = bc(X[B, 0], X[B, 1])
    s = rhs(X[I, 0], X[I, 1])
    u = np.zeros(N)
    u[B] = g
    u[I] = np.linalg.solve(K[np.ix_(I, I)], -m[I] * s - K[np.ix_(I, B)] @ g)
    return u


def test_poisson_matches_dense_solve():
    mesh = build_unit_square_mesh(6)
    rhs = lambda x, y: math.sqrt(2) + 0 * x
    A, b = assemble_p1_poisson(mesh, rhs, half_r2)
    u = np.zeros(mesh.n_vertices)
    u[mesh.interior] = solve_sparse(A, b)
    u[mesh.boundary] = half_r2(*mesh.vertices[mesh.boundary].T)
    ref = _dense_poisson(mesh, rhs, half_r2)
    np.testing.assert_allclose(u, ref, atol=1e-12)


def test_poisson_exact_for_quadratic_on_structured_mesh():
    # the 5-point stencil of this mesh is exact for quadratics
    mesh = build_unit_square_mesh(8)
    A, b = assemble_p1_poisson(mesh, lambda x, y: 2 + 0 * x, half_r2)
    uI = solve_sparse(A, b)
    X = mesh.vertices[mesh.interior]
    np.testing.assert_allclose(uI, half_r2(X[:, 0], X[:, 1]), atol=1e-12)


def test_field_dump_and_linf(tmp_path):
    m = build_unit_square_mesh(3)
    u = interpolate(m, half_r2)
    u.dump(tmp_path / "f.csv")
    rows = (tmp_path / "f.csv").read_text().splitlines()
    assert rows[0] == "node,x,y,value"
    vals = np.array([float(r.split(",")[3]) for r in rows[1:]])
    np.testing.assert_array_equal(vals, u.values)
    assert linf_node_error(u, half_r2) == 0.0
