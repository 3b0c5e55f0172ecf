"""Dense LU with partial pivoting for desk-scale exact solves."""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor
from scipy.linalg import lu_solve as _lapack_lu_solve

PIVOT_RTOL = 1e-13


class SingularMatrixError(np.linalg.LinAlgError):
    """A pivot fell below ``PIVOT_RTOL * ||A||_inf`` during elimination."""

    def __init__(self, index: int, pivot: float, threshold: float):
        self.index = index
        self.pivot = pivot
        self.threshold = threshold
        super().__init__(
            f"matrix is singular to working tolerance: pivot {index} has magnitude "
            f"{abs(pivot):.3e} <= {threshold:.3e}"
        )


@dataclass(frozen=True)
class LUFactorization:
    """Packed ``P A = L U`` factors.

    ``lu`` holds the unit-lower ``L`` below the diagonal and ``U`` on and above
    it; ``permutation[i]`` is the original row that ends up in position ``i``.
    """

    lu: np.ndarray
    piv: np.ndarray
    permutation: np.ndarray

    @property
    def n(self) -> int:
        return self.lu.shape[0]

    def factors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(P, L, U)`` with ``P @ A == L @ U``."""
        n = self.n
        L = np.tril(self.lu, -1) + np.eye(n)
        U = np.triu(self.lu)
        P = np.eye(n)[self.permutation]
        return P, L, U


def _row_permutation(piv: np.ndarray) -> np.ndarray:
    perm = np.arange(piv.size)
    for i, p in enumerate(piv):
        perm[i], perm[p] = perm[p], perm[i]
    return perm


def dense_lu(a) -> LUFactorization:
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"dense_lu needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return LUFactorization(np.zeros((0, 0)), np.zeros(0, dtype=np.int32), np.zeros(0, dtype=np.int64))
    norm_inf = float(np.max(np.sum(np.abs(a), axis=1)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(a, check_finite=True)
    # with partial pivoting the k-th pivot is U[k, k]
    threshold = PIVOT_RTOL * norm_inf
    diag = np.abs(np.diag(lu))
    small = np.flatnonzero(diag <= threshold)
    if small.size:
        k = int(small[0])
        raise SingularMatrixError(k, float(lu[k, k]), threshold)
    return LUFactorization(lu, piv, _row_permutation(piv))


def lu_solve(f: LUFactorization, b) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != f.n:
        raise ValueError(f"right-hand side has length {b.shape[0]}, factorization is {f.n}x{f.n}")
    if f.n == 0:
        return b.copy()
    return _lapack_lu_solve((f.lu, f.piv), b)


DEFAULT_DENSE_CAP = 2000


class TooLargeError(ValueError):
    """Problem exceeds the dense-analysis size cap."""


def dense_cap() -> int:
    """Largest n+m handled by dense analysis; ``ALSP_DENSE_CAP`` overrides."""
    raw = os.environ.get("ALSP_DENSE_CAP")
    if raw is None or not raw.strip():
        return DEFAULT_DENSE_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"ALSP_DENSE_CAP must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError("ALSP_DENSE_CAP must be positive")
    return cap


def check_dense(size: int, what: str = "dense analysis", cap: int | None = None) -> None:
    cap = dense_cap() if cap is None else cap
    if size > cap:
        raise TooLargeError(
            f"{what} refused: n+m = {size} exceeds the dense cap of {cap} (set ALSP_DENSE_CAP to raise it)"
        )
