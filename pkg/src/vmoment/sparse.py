"""Compressed-row matrices and the direct solve used inside Newton.

Thin wrapper over scipy.sparse CSR storage plus a SuperLU factorization.
A direct LU with partial pivoting replaces iterative solvers: the Newton
Jacobians here are nonsymmetric saddle-point systems and at desk scale a
factorization is dependable and simple.  Singular linearizations are
reported, not hidden.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["SparseMatrix", "LinearSolveReport", "SingularMatrixError",
           "from_triplets", "solve"]

PIVOT_REL_TOL = 1e-14


class SingularMatrixError(RuntimeError):
    """Raised when a factorization meets a (near-)zero pivot."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


@dataclass(frozen=True)
class SparseMatrix:
    """General sparse matrix in CSR form, column indices sorted per row."""

    csr: sp.csr_matrix

    @property
    def shape(self):
        return self.csr.shape

    @property
    def row_offsets(self) -> np.ndarray:
        return self.csr.indptr

    @property
    def column_indices(self) -> np.ndarray:
        return self.csr.indices

    @property
    def values(self) -> np.ndarray:
        return self.csr.data

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.csr @ x

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self.csr.T.tocsr())

    def todense(self) -> np.ndarray:
        return self.csr.toarray()

    def dump_matrix_market(self, path) -> None:
        """Write the matrix in MatrixMarket coordinate text format."""
        from scipy.io import mmwrite
        mmwrite(str(path), self.csr)


@dataclass(frozen=True)
class LinearSolveReport:
    residual_norm: float
    relative_residual: float
    nnz_matrix: int
    nnz_factors: int
    pivot_growth: float


def from_triplets(n_rows: int, n_cols: int, entries, _arrays=None) -> SparseMatrix:
    """Build a CSR matrix from (i, j, v) triplets; duplicates are summed."""
    if _arrays is not None:
        rows, cols, vals = _arrays
    else:
        entries = list(entries)
        if entries:
            rows, cols, vals = map(np.asarray, zip(*entries))
        else:
            rows = cols = vals = np.array([])
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.size:
        if rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols:
            raise ValueError("triplet index out of range")
    coo = sp.coo_matrix((np.asarray(vals, dtype=float), (rows, cols)),
                        shape=(n_rows, n_cols))
    csr = coo.tocsr()
    csr.sum_duplicates()
    csr.sort_indices()
    return SparseMatrix(csr)


def solve(A: SparseMatrix, b: np.ndarray) -> tuple[np.ndarray, LinearSolveReport]:
    """Direct sparse LU solve with a residual check.

    Raises SingularMatrixError when the factorization fails or a pivot of
    U falls below PIVOT_REL_TOL * max|A|.
    """
    n, m = A.shape
    if n != m:
        raise ValueError(f"matrix is {n}x{m}, not square")
    b = np.asarray(b, dtype=float)
    amax = float(np.max(np.abs(A.values))) if A.nnz else 0.0
    if amax == 0.0:
        raise SingularMatrixError("matrix has no nonzero entries", row=0)
    csc = A.csr.tocsc()
    try:
        lu = spla.splu(csc)
    except RuntimeError as exc:  # SuperLU signals exactly singular here
        raise SingularMatrixError(f"LU factorization failed: {exc}") from exc
    udiag = lu.U.diagonal()
    small = np.abs(udiag) <= PIVOT_REL_TOL * amax
    if np.any(small):
        row = int(np.argmax(small))
        raise SingularMatrixError(
            f"pivot {udiag[row]:.3e} below {PIVOT_REL_TOL:.0e}*max|A| in row {row}",
            row=row)
    x = lu.solve(b)
    # one round of iterative refinement drops the attainable residual floor
    # on the badly scaled Jacobians that weighted radial measures produce
    r = A.matvec(x) - b
    corr = lu.solve(r)
    if np.all(np.isfinite(corr)):
        x2 = x - corr
        r2 = A.matvec(x2) - b
        if np.linalg.norm(r2) < np.linalg.norm(r):
            x, r = x2, r2
    rn = float(np.linalg.norm(r))
    bn = float(np.linalg.norm(b))
    report = LinearSolveReport(
        residual_norm=rn,
        relative_residual=rn / bn if bn > 0 else rn,
        nnz_matrix=A.nnz,
        nnz_factors=int(lu.L.nnz + lu.U.nnz),
        pivot_growth=float(np.max(np.abs(lu.U.data)) / amax) if lu.U.nnz else 0.0,
    )
    return x, report
