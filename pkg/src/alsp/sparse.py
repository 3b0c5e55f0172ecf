"""Compressed-row sparse matrices and the two kernels every solver leans on.

The arrays are validated once at construction and then frozen.  Products are
delegated to SciPy's CSR/CSC kernels, which sum stored entries in row order
with a fixed loop structure, so repeated runs are bitwise identical.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class DimensionError(ValueError):
    """Raised when operand shapes do not agree."""


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True).reshape(-1)
    a.setflags(write=False)
    return a


class SparseMatrix:
    """Immutable CSR matrix.

    Parameters
    ----------
    rows, cols : int
        Shape of the matrix.
    row_offsets : array_like of int, length ``rows + 1``
    col_indices : array_like of int
        Column of each stored entry; strictly increasing within a row.
    values : array_like of float
    """

    __slots__ = ("rows", "cols", "row_offsets", "col_indices", "values", "_csr", "_csr_t")

    def __init__(self, rows, cols, row_offsets, col_indices, values):
        rows, cols = int(rows), int(cols)
        if rows < 0 or cols < 0:
            raise ValueError(f"negative shape ({rows}, {cols})")
        ptr = _frozen(row_offsets, np.int64)
        idx = _frozen(col_indices, np.int64)
        val = _frozen(values, np.float64)
        if ptr.size != rows + 1:
            raise ValueError(f"row_offsets has length {ptr.size}, expected {rows + 1}")
        if ptr[0] != 0 or np.any(np.diff(ptr) < 0):
            raise ValueError("row_offsets must start at 0 and be nondecreasing")
        if ptr[-1] != idx.size or idx.size != val.size:
            raise ValueError("row_offsets[-1], len(col_indices) and len(values) disagree")
        if idx.size and (idx.min() < 0 or idx.max() >= cols):
            raise ValueError(f"column index out of range [0, {cols})")
        if idx.size > 1:
            owner = np.repeat(np.arange(rows), np.diff(ptr))
            bad = (np.diff(idx) <= 0) & (owner[1:] == owner[:-1])
            if np.any(bad):
                i = int(owner[np.flatnonzero(bad)[0]])
                raise ValueError(f"row {i}: column indices not strictly increasing (duplicate or unsorted)")
        self.rows, self.cols = rows, cols
        self.row_offsets, self.col_indices, self.values = ptr, idx, val
        self._csr = sp.csr_matrix((val, idx, ptr), shape=(rows, cols))
        self._csr_t = self._csr.T  # CSC view over the same arrays

    # construction helpers -------------------------------------------------

    @classmethod
    def from_scipy(cls, a) -> "SparseMatrix":
        a = sp.csr_matrix(a, dtype=np.float64, copy=True)
        a.sum_duplicates()
        a.sort_indices()
        return cls(a.shape[0], a.shape[1], a.indptr, a.indices, a.data)

    @classmethod
    def from_dense(cls, a, drop_zeros: bool = True) -> "SparseMatrix":
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        if not drop_zeros:
            r, c = np.indices(a.shape)
            return cls.from_coo(a.shape[0], a.shape[1], r.ravel(), c.ravel(), a.ravel())
        return cls.from_scipy(sp.csr_matrix(a))

    @classmethod
    def from_coo(cls, rows, cols, r, c, v, allow_duplicates: bool = False) -> "SparseMatrix":
        r = np.asarray(r, dtype=np.int64)
        c = np.asarray(c, dtype=np.int64)
        v = np.asarray(v, dtype=np.float64)
        if not (r.size == c.size == v.size):
            raise ValueError("coordinate arrays differ in length")
        if r.size and (r.min() < 0 or r.max() >= rows or c.min() < 0 or c.max() >= cols):
            raise ValueError("coordinate index out of range")
        order = np.lexsort((c, r))
        r, c, v = r[order], c[order], v[order]
        if r.size > 1:
            dup = (np.diff(r) == 0) & (np.diff(c) == 0)
            if np.any(dup):
                if not allow_duplicates:
                    k = int(np.flatnonzero(dup)[0])
                    raise ValueError(f"duplicate entry at ({r[k]}, {c[k]})")
                return cls.from_scipy(sp.coo_matrix((v, (r, c)), shape=(rows, cols)))
        ptr = np.zeros(rows + 1, dtype=np.int64)
        np.add.at(ptr, r + 1, 1)
        return cls(rows, cols, np.cumsum(ptr), c, v)

    @classmethod
    def identity(cls, n: int, scale: float = 1.0) -> "SparseMatrix":
        return cls(n, n, np.arange(n + 1), np.arange(n), np.full(n, float(scale)))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "SparseMatrix":
        return cls(rows, cols, np.zeros(rows + 1, dtype=np.int64), [], [])

    # views ----------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr.copy()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_scipy(self._csr.T.tocsr())

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self):
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={self.nnz})"

    def __matmul__(self, x):
        return spmv(self, x)


def spmv(a: SparseMatrix, x) -> np.ndarray:
    """Return ``a @ x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != a.cols:
        raise DimensionError(f"spmv: matrix is {a.rows}x{a.cols}, vector has length {x.size}")
    return a._csr @ x


def spmv_transpose(a: SparseMatrix, x) -> np.ndarray:
    """Return ``a.T @ x`` without forming the transpose."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != a.rows:
        raise DimensionError(f"spmv_transpose: matrix is {a.rows}x{a.cols}, vector has length {x.size}")
    return a._csr_t @ x
