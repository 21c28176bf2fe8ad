"""Sparse kernels behind the Newton and Poisson solves (scipy.sparse backed)."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import pyamg

from .errors import InvalidArgument, LinearSolverError

RESIDUAL_TOL = 1e-10
#: systems larger than this go to AMG first; LU fill-in from wide stencils is severe
DIRECT_LIMIT = 2000


def as_csr(A):
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[1],):
        raise InvalidArgument(f"shape mismatch: matrix {A.shape} times vector {x.shape}")
    return A @ x


def _check(A, b):
    if A.shape[0] != A.shape[1]:
        raise InvalidArgument(f"matrix must be square, got {A.shape}")
    b = np.asarray(b, dtype=float)
    if b.shape != (A.shape[0],):
        raise InvalidArgument(f"right-hand side of shape {b.shape} for a {A.shape} matrix")
    return b


def _relres(A, x, b):
    nb = np.linalg.norm(b)
    return np.linalg.norm(A @ x - b) / (nb if nb > 0 else 1.0)


def factor_and_solve(A, b):
    """Sparse LU (SuperLU) solve."""
    A = as_csr(A)
    b = _check(A, b)
    try:
        lu = spla.splu(A.tocsc())
    except RuntimeError as exc:  # "Factor is exactly singular"
        raise LinearSolverError(str(exc)) from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise LinearSolverError("LU solve produced non-finite values")
    return x


def cg_solve(A, b, rtol=1e-12, maxiter=None):
    """Jacobi-preconditioned conjugate gradients for SPD matrices."""
    A = as_csr(A)
    b = _check(A, b)
    d = A.diagonal()
    if np.any(d <= 0):
        raise LinearSolverError("CG needs a positive diagonal")
    M = sp.diags(1.0 / d)
    x, info = spla.cg(A, b, rtol=rtol, atol=0.0, M=M, maxiter=maxiter or 10 * A.shape[0])
    if info != 0:
        raise LinearSolverError(f"CG did not converge (info={info})")
    return x


def amg_solve(A, b, tol=RESIDUAL_TOL, maxiter=200):
    """Ruge-Stuben AMG preconditioned GMRES.

    Rows are sign-flipped so that the diagonal is positive, which is what
    the coarsening expects for the (negated M-matrix) Newton Jacobians.
    """
    A = as_csr(A)
    b = _check(A, b)
    sign = np.where(A.diagonal() < 0, -1.0, 1.0)
    As = as_csr(sp.diags(sign) @ A)
    bs = sign * b
    try:
        # unrestarted GMRES cannot take more than n steps
        maxiter = min(maxiter, A.shape[0])
        ml = pyamg.ruge_stuben_solver(As, interpolation="direct")
        x = ml.solve(bs, tol=tol / 100, accel="gmres", maxiter=maxiter)
        for _ in range(3):
            if _relres(A, x, b) <= tol:
                break
            x = x + ml.solve(bs - As @ x, tol=tol / 100, accel="gmres", maxiter=maxiter)
    except Exception as exc:  # pyamg raises assorted errors on pathological input
        raise LinearSolverError(f"AMG setup/solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)) or _relres(A, x, b) > tol:
        raise LinearSolverError("AMG-GMRES did not reach the residual tolerance")
    return x


def solve_sparse(A, b, tol=RESIDUAL_TOL):
    """Solve ``A x = b`` to relative residual ``tol``.

    Small systems use sparse LU; large ones AMG-preconditioned GMRES.
    Each path falls back on the other, then on ILU-preconditioned GMRES.
    """
    A = as_csr(A)
    b = _check(A, b)
    if not np.any(b):
        return np.zeros_like(b)

    def lu(A, b):
        x = factor_and_solve(A, b)
        if _relres(A, x, b) > tol:
            x = x + factor_and_solve(A, b - A @ x)
        if _relres(A, x, b) > tol:
            raise LinearSolverError("LU residual above tolerance")
        return x

    order = (lu, amg_solve) if A.shape[0] <= DIRECT_LIMIT else (amg_solve, lu)
    for method in order:
        try:
            return method(A, b)
        except LinearSolverError:
            continue
    try:
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=20)
    except RuntimeError as exc:
        raise LinearSolverError(f"linear solve failed: {exc}") from exc
    M = spla.LinearOperator(A.shape, ilu.solve)
    x, _ = spla.gmres(A, b, M=M, rtol=tol / 10, atol=0.0, restart=200, maxiter=50)
    res = _relres(A, x, b)
    if not np.isfinite(res) or res > tol:
        raise LinearSolverError(f"linear solve failed: relative residual {res:.3e}")
    return x


def dump_coo(path, A):
    """Write ``row col value`` lines (0-based)."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with open(path, "w") as fh:
        fh.write(f"% {A.shape[0]} {A.shape[1]} {C.nnz}\n")
        for r, c, v in zip(C.row[order], C.col[order], C.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")
