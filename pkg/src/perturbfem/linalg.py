"""Sparse matrix storage and the two solvers used by the FEM pipeline.

Storage is compressed-row; factorization and matrix-vector products are
delegated to scipy.sparse.  The conjugate gradient solver is written out
explicitly so the Jacobi preconditioning and the residual history follow
the documented contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


@dataclass
class SparseMatrix:
    """Square sparse matrix in compressed-row layout."""

    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    n: int
    _csr: sp.csr_matrix = field(default=None, repr=False, compare=False)

    @classmethod
    def from_scipy(cls, mat) -> "SparseMatrix":
        csr = sp.csr_matrix(mat)
        csr.sort_indices()
        return cls(csr.indptr, csr.indices, csr.data, csr.shape[0], csr)

    @classmethod
    def from_dense(cls, arr) -> "SparseMatrix":
        return cls.from_scipy(sp.csr_matrix(np.asarray(arr, dtype=float)))

    def to_scipy(self) -> sp.csr_matrix:
        if self._csr is None:
            self._csr = sp.csr_matrix(
                (self.values, self.col_indices, self.row_offsets),
                shape=(self.n, self.n))
        return self._csr

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_scipy() @ x

    def diagonal(self) -> np.ndarray:
        return self.to_scipy().diagonal()


def cg_solve(A: SparseMatrix, b: np.ndarray, rel_tol: float = 1e-12,
             max_iter: int = 10000):
    """Jacobi-preconditioned conjugate gradients for SPD systems.

    Returns (x, iterations, final_residual, residual_history).  The final
    residual is the Euclidean norm of b - A x; the history holds the
    Jacobi-preconditioned residual norms sqrt(r . D^-1 r) per iteration.
    The returned iterates carry residual smoothing: each step keeps the
    point on the segment to the new CG iterate that minimizes the
    preconditioned residual norm, which makes the history monotonically
    nonincreasing without changing the convergence behavior.
    Raises SolverError on a nonpositive diagonal; reports (not raises)
    hitting the iteration cap through the returned residual.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise SolverError("matrix has a zero or negative diagonal entry")
    inv_diag = 1.0 / diag

    b = np.asarray(b, dtype=float)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros_like(b), 0, 0.0, [0.0]

    x = np.zeros_like(b)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    xs = x.copy()            # smoothed iterate and its residual
    rs = r.copy()
    rs_norm_sq = rz
    history = [float(np.sqrt(rz))]
    final_res = float(np.linalg.norm(rs))
    iterations = 0
    for k in range(max_iter):
        Ap = A.matvec(p)
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        z = inv_diag * r
        rz_new = r @ z
        # minimize ||rs + eta (r - rs)|| in the D^-1 inner product
        d = r - rs
        dd = d @ (inv_diag * d)
        eta = 0.0 if dd == 0.0 else -(rs @ (inv_diag * d)) / dd
        xs = xs + eta * (x - xs)
        rs = rs + eta * d
        rs_norm_sq = min(rs_norm_sq, rs @ (inv_diag * rs))
        history.append(float(np.sqrt(max(rs_norm_sq, 0.0))))
        iterations = k + 1
        final_res = float(np.linalg.norm(rs))
        if final_res <= rel_tol * norm_b:
            break
        p = z + (rz_new / rz) * p
        rz = rz_new
    return xs, iterations, final_res, history


def direct_solve(A: SparseMatrix, b: np.ndarray) -> np.ndarray:
    """Sparse LU solve (COLAMD ordering); for the indefinite Stokes blocks."""
    b = np.asarray(b, dtype=float)
    try:
        lu = spla.splu(A.to_scipy().tocsc())
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SolverError("numerically singular pivot in sparse factorization")
    return x
