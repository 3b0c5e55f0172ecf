"""Desk-scale saddle-point test problems.

Staggered (MAC) finite differences on the unit square with N x N pressure
cells give Stokes and Oseen systems whose ``B`` is a discrete gradient of
rank m-1 (constants are annihilated).  Random instances control the rank of
``B`` and the definiteness of ``G`` directly.  Every generated right-hand side
is manufactured from a stored solution, so singular systems stay consistent.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import mmio
from .dense import dense_cap
from .sparse import DimensionError, SparseMatrix, spmv, spmv_transpose
from .system import SaddleSystem, apply_A

KINDS = ("stokes_mac", "oseen_mac", "random", "bb1_counterexample", "import")

BB1_MATRIX = np.array([[1.0, 2.0], [-2.0, 1.0]])


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    grid: int = 8
    nu: float = 1.0
    wind: tuple[float, float] = (1.0, 0.0)
    n: int = 6
    m: int = 3
    rank: Optional[int] = None
    shift: float = 1.0
    path: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        if kind in ("bb1", "bb1_demo"):
            kind = "bb1_counterexample"
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "wind", tuple(float(w) for w in self.wind))
        if kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if kind in ("stokes_mac", "oseen_mac"):
            if self.grid < 2:
                raise ValueError(f"grid must be >= 2, got {self.grid}")
            if not self.nu > 0:
                raise ValueError(f"viscosity must be positive, got {self.nu}")
            if len(self.wind) != 2:
                raise ValueError("wind must have two components")
        if kind == "random":
            s = self.m if self.rank is None else self.rank
            if not 1 <= s <= self.m <= self.n:
                raise ValueError(f"need 1 <= rank <= m <= n, got rank={s}, m={self.m}, n={self.n}")
        if kind == "import" and not self.path:
            raise ValueError("import needs a path")


@dataclass(frozen=True)
class ProblemProperties:
    g_is_upd: Optional[bool]
    b_rank: Optional[int]
    h_min_eig: Optional[float]


@dataclass(eq=False)
class GeneratedProblem:
    system: SaddleSystem
    reference_solution: Optional[np.ndarray] = None
    spec: Optional[ProblemSpec] = None
    meta: dict = field(default_factory=dict)

    @cached_property
    def properties(self) -> ProblemProperties:
        return compute_properties(self.system)


def numerical_rank(a: np.ndarray, rtol: float = 1e-10) -> int:
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(sv > rtol * sv[0])) if sv[0] > 0 else 0


def compute_properties(sys: SaddleSystem, cap: int | None = None) -> ProblemProperties:
    cap = dense_cap() if cap is None else cap
    if sys.size > cap:
        return ProblemProperties(None, sys.b_rank, None)
    G = sys.G.to_dense()
    h_min = float(np.linalg.eigvalsh(0.5 * (G + G.T))[0]) if sys.n else float("inf")
    return ProblemProperties(h_min > 0, numerical_rank(sys.B.to_dense()), h_min)


# MAC layout --------------------------------------------------------------

def _mac_layout(N: int):
    """Index maps for u (vertical faces), v (horizontal faces) and p (cells)."""
    nu_ = (N - 1) * N

    def u(i, j):  # x = i h, i = 1..N-1 ; y = (j + 1/2) h, j = 0..N-1
        return j * (N - 1) + (i - 1)

    def v(i, j):  # x = (i + 1/2) h ; y = j h, j = 1..N-1
        return nu_ + (j - 1) * N + i

    def p(i, j):
        return j * N + i

    return nu_, u, v, p


def mac_operators(N: int, wind=(0.0, 0.0)):
    """Return ``(L, C, Bgrad)`` as SciPy CSR matrices for an N x N MAC grid.

    ``L`` is the vector Laplacian scaled by ``1/h^2`` (no-slip walls via ghost
    reflection, so it is SPD), ``C`` the centred convection for a constant
    wind (exactly skew-symmetric), ``Bgrad`` the pressure gradient.
    """
    h = 1.0 / N
    nu_, u, v, p = _mac_layout(N)
    n = 2 * nu_
    m = N * N
    L = sp.lil_matrix((n, n))
    E_x = sp.lil_matrix((n, n))  # coupling to the +x neighbour
    E_y = sp.lil_matrix((n, n))  # coupling to the +y neighbour
    Bg = sp.lil_matrix((n, m))

    def stencil(k, nbrs, walls):
        L[k, k] = (4.0 + walls) / h**2
        for kk in nbrs:
            L[k, kk] = -1.0 / h**2

    for j in range(N):
        for i in range(1, N):
            k = u(i, j)
            nbrs, walls = [], 0
            if i > 1:
                nbrs.append(u(i - 1, j))
            if i < N - 1:
                nbrs.append(u(i + 1, j))
                E_x[k, u(i + 1, j)] = 1.0
            if j > 0:
                nbrs.append(u(i, j - 1))
            else:
                walls += 1
            if j < N - 1:
                nbrs.append(u(i, j + 1))
                E_y[k, u(i, j + 1)] = 1.0
            else:
                walls += 1
            stencil(k, nbrs, walls)
            Bg[k, p(i, j)] = 1.0 / h
            Bg[k, p(i - 1, j)] = -1.0 / h

    for j in range(1, N):
        for i in range(N):
            k = v(i, j)
            nbrs, walls = [], 0
            if j > 1:
                nbrs.append(v(i, j - 1))
            if j < N - 1:
                nbrs.append(v(i, j + 1))
                E_y[k, v(i, j + 1)] = 1.0
            if i > 0:
                nbrs.append(v(i - 1, j))
            else:
                walls += 1
            if i < N - 1:
                nbrs.append(v(i + 1, j))
                E_x[k, v(i + 1, j)] = 1.0
            else:
                walls += 1
            stencil(k, nbrs, walls)
            Bg[k, p(i, j)] = 1.0 / h
            Bg[k, p(i, j - 1)] = -1.0 / h

    E_x, E_y = E_x.tocsr(), E_y.tocsr()
    w1, w2 = (float(w) for w in wind)
    C = (w1 / (2 * h)) * (E_x - E_x.T) + (w2 / (2 * h)) * (E_y - E_y.T)
    return L.tocsr(), C.tocsr(), Bg.tocsr()


# generators --------------------------------------------------------------

def _manufactured(G: SparseMatrix, B: SparseMatrix, rng, labels, b_rank) -> GeneratedProblem:
    n, m = B.shape
    z = rng.uniform(-1.0, 1.0, size=n + m)
    x, y = z[:n], z[n:]
    f = spmv(G, x) + spmv(B, y)
    g = -spmv_transpose(B, x)
    return GeneratedProblem(SaddleSystem(G, B, f, g, b_rank, labels), z)


def _stokes_like(spec: ProblemSpec, convect: bool) -> GeneratedProblem:
    N = spec.grid
    L, C, Bg = mac_operators(N, spec.wind if convect else (0.0, 0.0))
    Gs = spec.nu * L + C if convect else spec.nu * L
    G = SparseMatrix.from_scipy(Gs)
    B = SparseMatrix.from_scipy(Bg)
    labels = {"kind": spec.kind, "grid": N, "nu": spec.nu, "seed": spec.seed}
    if convect:
        labels["wind"] = ",".join(repr(w) for w in spec.wind)
    rng = np.random.default_rng(spec.seed)
    return _manufactured(G, B, rng, labels, N * N - 1)


def _random(spec: ProblemSpec) -> GeneratedProblem:
    n, m = spec.n, spec.m
    s = m if spec.rank is None else spec.rank
    rng = np.random.default_rng(spec.seed)
    F = rng.standard_normal((n, n))
    R = F @ F.T / n
    E = rng.standard_normal((n, n))
    K = 0.5 * (E - E.T)
    G = spec.shift * np.eye(n) + R + K
    U, _ = np.linalg.qr(rng.standard_normal((n, s)))
    Bd = U @ rng.standard_normal((s, m))
    labels = {"kind": "random", "n": n, "m": m, "rank": s, "shift": spec.shift, "seed": spec.seed}
    return _manufactured(SparseMatrix.from_dense(G), SparseMatrix.from_dense(Bd), rng, labels, s)


def _bb1() -> GeneratedProblem:
    G = SparseMatrix.from_dense(BB1_MATRIX)
    B = SparseMatrix.zeros(2, 0)
    sys = SaddleSystem(G, B, np.zeros(2), np.zeros(0), 0, {"kind": "bb1_counterexample"})
    return GeneratedProblem(sys, np.zeros(2))


def generate(spec: ProblemSpec) -> GeneratedProblem:
    if spec.kind == "stokes_mac":
        prob = _stokes_like(spec, convect=False)
    elif spec.kind == "oseen_mac":
        prob = _stokes_like(spec, convect=True)
    elif spec.kind == "random":
        prob = _random(spec)
    elif spec.kind == "bb1_counterexample":
        prob = _bb1()
    else:
        return load(spec.path)
    prob.spec = spec
    prob.meta = dict(prob.system.labels)
    return prob


# directory layout ---------------------------------------------------------

def write_problem(prob: GeneratedProblem, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    sys = prob.system
    mmio.write_matrix_market(sys.G, os.path.join(directory, "G.mtx"))
    mmio.write_matrix_market(sys.B, os.path.join(directory, "B.mtx"))
    mmio.write_vector(sys.f, os.path.join(directory, "f.vec"))
    mmio.write_vector(sys.g, os.path.join(directory, "g.vec"))
    if prob.reference_solution is not None:
        mmio.write_vector(prob.reference_solution, os.path.join(directory, "z_ref.vec"))
    meta = {"kind": sys.labels.get("kind", "import"), "n": sys.n, "m": sys.m}
    for key in ("seed", "nu", "wind", "grid", "rank", "shift"):
        if key in sys.labels:
            meta[key] = sys.labels[key]
    if sys.b_rank is not None:
        meta["b_rank"] = sys.b_rank
    with open(os.path.join(directory, "meta.txt"), "w") as fh:
        fh.writelines(f"{k}={v}\n" for k, v in meta.items())


def _read_meta(path) -> dict:
    meta = {}
    if not os.path.isfile(path):
        return meta
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise mmio.FormatError(f"{path}:{ln}: expected key=value")
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    return meta


def load(directory) -> GeneratedProblem:
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"problem directory {directory} does not exist")
    G = mmio.read_matrix_market(mmio.require_file(directory, "G.mtx"))
    B = mmio.read_matrix_market(mmio.require_file(directory, "B.mtx"))
    f = mmio.read_vector(mmio.require_file(directory, "f.vec"))
    g = mmio.read_vector(mmio.require_file(directory, "g.vec"))
    meta = _read_meta(os.path.join(directory, "meta.txt"))
    b_rank = int(meta["b_rank"]) if "b_rank" in meta else None
    labels = dict(meta)
    labels.setdefault("kind", "import")
    labels["path"] = str(directory)
    sys = SaddleSystem(G, B, f, g, b_rank, labels)
    ref_path = os.path.join(directory, "z_ref.vec")
    ref = mmio.read_vector(ref_path) if os.path.isfile(ref_path) else None
    if ref is not None and ref.size != sys.size:
        raise DimensionError(f"z_ref.vec has length {ref.size}, expected {sys.size}")
    return GeneratedProblem(sys, ref, ProblemSpec("import", path=str(directory)), meta)


def reference_residual(prob: GeneratedProblem) -> float:
    """``||A z* - l|| / ||l||`` for the stored reference solution."""
    sys = prob.system
    rhs = sys.rhs
    scale = np.linalg.norm(rhs)
    r = np.linalg.norm(apply_A(sys, prob.reference_solution) - rhs)
    return float(r / scale) if scale else float(r)
