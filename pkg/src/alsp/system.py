"""Saddle-point systems, augmented Lagrangian parameters and block operators.

A system is

    [  G   B ] [x]   [f]
    [ -B^T 0 ] [y] = [g]

with ``G`` n-by-n and ``B`` n-by-m.  The shifted matrix ``M`` adds ``omega*Q``
in the (2,2) block and ``N = blockdiag(0, omega*Q)`` is the remainder, so
``A = M - N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .sparse import DimensionError, SparseMatrix, spmv, spmv_transpose


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    G: SparseMatrix
    B: SparseMatrix
    f: np.ndarray
    g: np.ndarray
    b_rank: Optional[int] = None
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.array(self.f, dtype=np.float64).reshape(-1)
        g = np.array(self.g, dtype=np.float64).reshape(-1)
        f.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)
        n, m = self.B.shape
        if self.G.shape != (n, n):
            raise DimensionError(f"G is {self.G.shape}, expected ({n}, {n}) to match B {self.B.shape}")
        if n < m:
            raise DimensionError(f"B must have n >= m, got {n}x{m}")
        if f.size != n:
            raise DimensionError(f"f has length {f.size}, expected n={n}")
        if g.size != m:
            raise DimensionError(f"g has length {g.size}, expected m={m}")
        if self.b_rank is not None and not 0 <= self.b_rank <= m:
            raise ValueError(f"b_rank={self.b_rank} outside [0, {m}]")

    @property
    def n(self) -> int:
        return self.B.rows

    @property
    def m(self) -> int:
        return self.B.cols

    @property
    def size(self) -> int:
        return self.n + self.m

    @property
    def rhs(self) -> np.ndarray:
        return np.concatenate([self.f, self.g])

    def split(self, z) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 1 or z.size != self.size:
            raise DimensionError(f"vector has length {z.size}, expected n+m={self.size}")
        return z[: self.n], z[self.n:]

    def dense_A(self) -> np.ndarray:
        G, B = self.G.to_dense(), self.B.to_dense()
        return np.block([[G, B], [-B.T, np.zeros((self.m, self.m))]])

    def scipy_A(self) -> sp.csr_matrix:
        return sp.bmat(
            [[self.G.to_scipy(), self.B.to_scipy()], [-self.B.to_scipy().T, None]],
            format="csr",
            dtype=np.float64,
        ) if self.m else self.G.to_scipy()

    def with_rhs(self, f, g) -> "SaddleSystem":
        return SaddleSystem(self.G, self.B, f, g, self.b_rank, dict(self.labels))


def apply_A(sys: SaddleSystem, z) -> np.ndarray:
    """Return ``(G x + B y, -B^T x)``."""
    x, y = sys.split(z)
    return np.concatenate([spmv(sys.G, x) + spmv(sys.B, y), -spmv_transpose(sys.B, x)])


def residual(sys: SaddleSystem, z) -> np.ndarray:
    """Return ``A z - l``."""
    return apply_A(sys, z) - sys.rhs


class QMode:
    """The SPD weight ``Q``: identity, or a positive diagonal."""

    __slots__ = ("d",)

    def __init__(self, d=None):
        if d is not None:
            d = np.array(d, dtype=np.float64).reshape(-1)
            if np.any(~np.isfinite(d)) or np.any(d <= 0):
                raise ValueError("diagonal Q entries must be positive and finite")
            d.setflags(write=False)
        self.d = d

    @classmethod
    def identity(cls) -> "QMode":
        return cls(None)

    @classmethod
    def diagonal(cls, d) -> "QMode":
        return cls(d)

    @property
    def is_identity(self) -> bool:
        return self.d is None

    def diag(self, m: int) -> np.ndarray:
        if self.d is None:
            return np.ones(m)
        if self.d.size != m:
            raise DimensionError(f"diagonal Q has length {self.d.size}, system has m={m}")
        return np.array(self.d)

    def apply(self, y) -> np.ndarray:
        return np.array(y, dtype=np.float64) if self.d is None else self.diag(len(y)) * y

    def solve(self, y) -> np.ndarray:
        return np.array(y, dtype=np.float64) if self.d is None else y / self.diag(len(y))

    def dense(self, m: int) -> np.ndarray:
        return np.diag(self.diag(m))

    def __repr__(self):
        return "QMode.identity()" if self.d is None else f"QMode.diagonal({list(self.d)})"


@dataclass(frozen=True)
class ALConfig:
    """Augmented Lagrangian parameters plus stopping controls."""

    omega: float = 1.0
    q: QMode = field(default_factory=QMode.identity)
    delta: float = 0.5
    beta: float = 1.0
    tol: float = 1e-6
    maxit: int = 100_000

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.maxit < 0:
            raise ValueError("maxit must be nonnegative")


class ShiftedOperator:
    """Matrix-free ``M = [[G, B], [-B^T, omega Q]]``."""

    def __init__(self, sys: SaddleSystem, omega: float, q: QMode | None = None):
        if not omega > 0:
            raise ValueError("omega must be positive")
        self.sys = sys
        self.omega = float(omega)
        self.q = q if q is not None else QMode.identity()
        self._wq = self.omega * self.q.diag(sys.m)
        self.shape = (sys.size, sys.size)

    @classmethod
    def from_config(cls, sys: SaddleSystem, cfg: ALConfig) -> "ShiftedOperator":
        return cls(sys, cfg.omega, cfg.q)

    def apply(self, z) -> np.ndarray:
        x, y = self.sys.split(z)
        top = spmv(self.sys.G, x) + spmv(self.sys.B, y)
        bottom = self._wq * y - spmv_transpose(self.sys.B, x)
        return np.concatenate([top, bottom])

    __call__ = apply

    def dense(self) -> np.ndarray:
        M = self.sys.dense_A()
        n = self.sys.n
        M[n:, n:] += np.diag(self._wq)
        return M


class SplitOperator:
    """Matrix-free ``N = blockdiag(0, omega Q)``."""

    def __init__(self, sys: SaddleSystem, omega: float, q: QMode | None = None):
        self.sys = sys
        self.omega = float(omega)
        self.q = q if q is not None else QMode.identity()
        self._wq = self.omega * self.q.diag(sys.m)
        self.shape = (sys.size, sys.size)

    @classmethod
    def from_config(cls, sys: SaddleSystem, cfg: ALConfig) -> "SplitOperator":
        return cls(sys, cfg.omega, cfg.q)

    def apply(self, z) -> np.ndarray:
        _, y = self.sys.split(z)
        return np.concatenate([np.zeros(self.sys.n), self._wq * y])

    __call__ = apply

    def dense(self) -> np.ndarray:
        n, m = self.sys.n, self.sys.m
        out = np.zeros((n + m, n + m))
        out[n:, n:] = np.diag(self._wq)
        return out


def apply_M(op: ShiftedOperator, z) -> np.ndarray:
    return op.apply(z)


def apply_N(op: SplitOperator, z) -> np.ndarray:
    return op.apply(z)


def shifted_rhs(sys: SaddleSystem, cfg_or_op, y) -> np.ndarray:
    """``l_k = (f, omega Q y_k + g)``, the right-hand side of the exact SPAL step."""
    omega, q = cfg_or_op.omega, cfg_or_op.q
    return np.concatenate([sys.f, omega * q.apply(y) + sys.g])


class WeightedNorm:
    """``||v||_W = sqrt(v^T W v)`` for the diagonal SPD weights used here.

    ``euclidean()`` is the 2-norm, ``p_beta(beta, q, n)`` uses
    ``W = blockdiag(I_n, beta Q^{-1})`` on vectors of length n+m and
    ``q_norm(q)`` uses ``W = Q`` on vectors of length m.
    """

    def __init__(self, kind: str, beta: float = 1.0, q: QMode | None = None, n: int = 0):
        if kind not in ("euclidean", "p_beta", "q_norm"):
            raise ValueError(f"unknown norm kind {kind!r}")
        if kind == "p_beta" and not beta > 0:
            raise ValueError("beta must be positive")
        self.kind = kind
        self.beta = float(beta)
        self.q = q if q is not None else QMode.identity()
        self.n = int(n)

    @classmethod
    def euclidean(cls) -> "WeightedNorm":
        return cls("euclidean")

    @classmethod
    def p_beta(cls, beta: float, q: QMode, n: int) -> "WeightedNorm":
        return cls("p_beta", beta=beta, q=q, n=n)

    @classmethod
    def q_norm(cls, q: QMode) -> "WeightedNorm":
        return cls("q_norm", q=q)

    def weights(self, size: int) -> np.ndarray:
        if self.kind == "euclidean":
            return np.ones(size)
        if self.kind == "q_norm":
            return self.q.diag(size)
        m = size - self.n
        if m < 0:
            raise DimensionError(f"vector length {size} shorter than n={self.n}")
        return np.concatenate([np.ones(self.n), self.beta / self.q.diag(m)])

    def __call__(self, v) -> float:
        v = np.asarray(v, dtype=np.float64)
        if self.kind != "euclidean":
            v = np.sqrt(self.weights(v.size)) * v
        # rescale so tiny or huge entries do not under/overflow when squared
        big = float(np.max(np.abs(v))) if v.size else 0.0
        if big == 0.0 or not np.isfinite(big):
            return big
        return big * float(np.linalg.norm(v / big))

    def matrix_norm(self, a: np.ndarray) -> float:
        """Induced norm ``||W^{1/2} a W^{-1/2}||_2`` of a dense square matrix."""
        w = np.sqrt(self.weights(a.shape[0]))
        return float(np.linalg.norm(w[:, None] * a / w[None, :], 2)) if a.size else 0.0

    def __repr__(self):
        if self.kind == "euclidean":
            return "WeightedNorm.euclidean()"
        if self.kind == "q_norm":
            return f"WeightedNorm.q_norm({self.q!r})"
        return f"WeightedNorm.p_beta({self.beta}, {self.q!r}, n={self.n})"


Apply = Callable[[np.ndarray], np.ndarray]


def as_apply(op) -> Apply:
    """Accept a callable, an object with ``.apply`` or a matrix."""
    if hasattr(op, "apply"):
        return op.apply
    if callable(op):
        return op
    if isinstance(op, SparseMatrix):
        return lambda v: spmv(op, v)
    mat = op
    return lambda v: mat @ v
