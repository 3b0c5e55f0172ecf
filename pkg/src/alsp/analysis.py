"""Dense spectral diagnostics for the augmented Lagrangian splitting.

Everything here forms matrices densely and is guarded by the dense cap
(``ALSP_DENSE_CAP``, default 2000 unknowns).  Notation: ``H`` is the
symmetric part of ``G``, ``K = B Q^{-1} B^T``, ``M``/``N`` the shifted
splitting and ``T = M^{-1} N``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .dense import check_dense, dense_lu, lu_solve
from .system import ALConfig, QMode, SaddleSystem, ShiftedOperator, SplitOperator, WeightedNorm

RANK_RTOL = 1e-10
UNIT_TOL = 1e-8
MATCH_TOL = 1e-7


class AnalysisError(ValueError):
    pass


def _dense_blocks(sys: SaddleSystem, q: QMode | None):
    check_dense(sys.size)
    q = q or QMode.identity()
    G = sys.G.to_dense()
    B = sys.B.to_dense()
    qinv = 1.0 / q.diag(sys.m)
    K = (B * qinv) @ B.T
    return G, B, 0.5 * (G + G.T), K, qinv


def _rank_split(B: np.ndarray):
    """Full SVD of ``B`` with the numerical rank at ``RANK_RTOL * sigma_max``."""
    n, m = B.shape
    if m == 0:
        return np.eye(n), np.zeros(0), np.eye(0), 0
    U, sig, Vt = np.linalg.svd(B, full_matrices=True)
    s = int(np.sum(sig > RANK_RTOL * sig[0])) if sig.size and sig[0] > 0 else 0
    return U, sig, Vt.T, s


def compute_eta(sys: SaddleSystem, q: QMode | None = None) -> float:
    """Smallest value of ``x^T H x / x^T K x`` over ``x`` outside ``Null(B^T)``.

    Writing ``x = U_r a + U_n b`` with ``U_r`` spanning ``Range(B)`` and
    ``U_n`` its orthogonal complement, the denominator only sees ``a``
    (``K U_n = 0``).  For fixed ``a`` the numerator is a convex quadratic in
    ``b`` whose minimum is ``a^T S_H a`` with the Schur complement
    ``S_H = H_rr - H_rn H_nn^{-1} H_nr``.  The infimum is therefore the
    smallest eigenvalue of the symmetric-definite pencil ``(S_H, U_r^T K U_r)``;
    it is attained because the quotient is scale invariant in ``a``.

    Returns ``inf`` when ``B`` has rank zero.
    """
    G, B, H, K, _ = _dense_blocks(sys, q)
    U, _, _, s = _rank_split(B)
    if s == 0:
        return math.inf
    Ur, Un = U[:, :s], U[:, s:]
    Hrr = Ur.T @ H @ Ur
    if Un.shape[1]:
        Hnn = Un.T @ H @ Un
        lam = float(np.linalg.eigvalsh(Hnn)[0])
        if lam <= 0:
            raise AnalysisError(
                f"H is not positive definite on Null(B^T): smallest eigenvalue there is {lam:.6g}"
            )
        Hrn = Ur.T @ H @ Un
        Hrr = Hrr - Hrn @ np.linalg.solve(Hnn, Hrn.T)
    Wrr = Ur.T @ K @ Ur
    Hrr = 0.5 * (Hrr + Hrr.T)
    Wrr = 0.5 * (Wrr + Wrr.T)
    return float(sla.eigh(Hrr, Wrr, eigvals_only=True)[0])


def omega_max_exact(eta: float) -> float:
    """``1 / (-2 eta)_+`` with ``1/0 = inf``."""
    return math.inf if eta >= 0 else 1.0 / (-2.0 * eta)


def generalized_mu(sys: SaddleSystem, q: QMode | None = None) -> np.ndarray:
    """The ``s`` finite eigenvalues of ``G x = mu K x`` with ``x`` outside ``Null(B^T)``.

    Same coordinates as ``compute_eta``: eliminating the ``Null(B^T)``
    component leaves ``S_G a = mu W_rr a`` with the Schur complement of ``G``.
    """
    G, B, _, K, _ = _dense_blocks(sys, q)
    U, _, _, s = _rank_split(B)
    if s == 0:
        return np.zeros(0, dtype=complex)
    Ur, Un = U[:, :s], U[:, s:]
    Sg = Ur.T @ G @ Ur
    if Un.shape[1]:
        Sg = Sg - (Ur.T @ G @ Un) @ np.linalg.solve(Un.T @ G @ Un, Un.T @ G @ Ur)
    Wrr = Ur.T @ K @ Ur
    mu = sla.eigvals(np.linalg.solve(Wrr, Sg))
    return np.sort_complex(mu.astype(complex))


def iteration_matrix(sys: SaddleSystem, cfg: ALConfig) -> np.ndarray:
    check_dense(sys.size)
    lu = dense_lu(ShiftedOperator.from_config(sys, cfg).dense())
    return lu_solve(lu, SplitOperator.from_config(sys, cfg).dense())


def greedy_match(observed, predicted) -> tuple[float, list]:
    """Pair each predicted value with its nearest unused observed value.

    Returns the largest pairing distance and the pairs.
    """
    obs = list(np.asarray(observed, dtype=complex))
    pred = np.asarray(predicted, dtype=complex)
    if len(obs) != pred.size:
        raise AnalysisError(f"cannot match {len(obs)} observed with {pred.size} predicted values")
    used = np.zeros(len(obs), dtype=bool)
    worst = 0.0
    pairs = []
    obs_arr = np.array(obs)
    for p in pred:
        d = np.abs(obs_arr - p)
        d[used] = np.inf
        j = int(np.argmin(d))
        used[j] = True
        worst = max(worst, float(d[j]))
        pairs.append((complex(p), complex(obs_arr[j])))
    return worst, pairs


def spectral_radii(eigs) -> tuple[float, float]:
    """``rho(T)`` and the pseudo radius ``v(T)`` that skips eigenvalues at 1."""
    eigs = np.asarray(eigs, dtype=complex)
    if eigs.size == 0:
        return 0.0, 0.0
    mod = np.abs(eigs)
    away = np.abs(eigs - 1.0) > UNIT_TOL
    return float(mod.max()), float(mod[away].max()) if np.any(away) else 0.0


@dataclass
class SpectrumCheck:
    eigenvalues: np.ndarray
    predicted: np.ndarray
    mu: np.ndarray
    mu_from_T: np.ndarray
    match_error: float
    rho_T: float
    v_T: float
    s_rank: int

    @property
    def matches(self) -> bool:
        return self.match_error <= MATCH_TOL


def iteration_matrix_spectrum(sys: SaddleSystem, cfg: ALConfig) -> SpectrumCheck:
    """Dense spectrum of ``T`` against ``{0 (n times), 1 (m-s times), w mu/(1 + w mu)}``."""
    T = iteration_matrix(sys, cfg)
    eigs = sla.eigvals(T)
    _, _, _, s = _rank_split(sys.B.to_dense())
    mu = generalized_mu(sys, cfg.q)
    w = cfg.omega
    predicted = np.concatenate(
        [np.zeros(sys.n, dtype=complex), np.ones(sys.m - s, dtype=complex), w * mu / (1.0 + w * mu)]
    )
    err, _ = greedy_match(eigs, predicted)
    # invert lam = w mu / (1 + w mu) on the eigenvalues that are neither 0 nor 1
    keep = (np.abs(eigs) > UNIT_TOL) & (np.abs(eigs - 1.0) > UNIT_TOL)
    lam = eigs[keep]
    mu_t = np.sort_complex(lam / (w * (1.0 - lam)))
    rho, v = spectral_radii(eigs)
    return SpectrumCheck(eigs, predicted, mu, mu_t, err, rho, v, s)


def numerical_rank(a: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if a.size == 0:
        return 0
    sig = np.linalg.svd(a, compute_uv=False)
    return 0 if sig[0] == 0 else int(np.sum(sig > rtol * sig[0]))


def index_one(T: np.ndarray) -> bool:
    """``rank(I - T) == rank((I - T)^2)``."""
    E = np.eye(T.shape[0]) - T
    return numerical_rank(E) == numerical_rank(E @ E)


def index_check(sys: SaddleSystem, cfg: ALConfig) -> bool:
    return index_one(iteration_matrix(sys, cfg))


def lambda1(sys: SaddleSystem, cfg: ALConfig) -> float:
    """``lambda_min(2 omega H + B Q^{-1} B^T)``."""
    _, _, H, K, _ = _dense_blocks(sys, cfg.q)
    if sys.n == 0:
        return math.inf
    return float(np.linalg.eigvalsh(2.0 * cfg.omega * H + K)[0])


def nm_matrix(sys: SaddleSystem, cfg: ALConfig) -> np.ndarray:
    """Dense ``N M^{-1}``."""
    check_dense(sys.size)
    lu = dense_lu(ShiftedOperator.from_config(sys, cfg).dense().T)
    # N M^{-1} = (M^{-T} N^T)^T
    return lu_solve(lu, SplitOperator.from_config(sys, cfg).dense().T).T


def nm_norm(sys: SaddleSystem, cfg: ALConfig, beta: float | None = None, reduced: bool = False) -> float:
    """``||N M^{-1}||`` in the norm weighted by ``blockdiag(I, beta Q^{-1})``.

    With ``reduced=True`` the multiplier block is restricted to the
    coordinates of ``Range(Q^{-1/2} B^T)``, dropping the directions where
    the full norm is pinned at 1 for rank-deficient ``B``.
    """
    beta = cfg.beta if beta is None else beta
    if sys.m == 0:
        return 0.0
    norm = WeightedNorm.p_beta(beta, cfg.q, sys.n)
    w = np.sqrt(norm.weights(sys.size))
    X = w[:, None] * nm_matrix(sys, cfg) / w[None, :]
    if reduced:
        Bq = sys.B.to_dense() / np.sqrt(cfg.q.diag(sys.m))[None, :]
        _, _, V, s = _rank_split(Bq)
        D = sla.block_diag(np.eye(sys.n), V[:, :s])
        X = D.T @ X @ D
    return float(np.linalg.norm(X, 2)) if X.size else 0.0


def nm_norm_closed_form(sys: SaddleSystem, cfg: ALConfig, beta: float | None = None) -> float:
    """Same norm through the Schur complement ``S = G + K / omega``.

    Only the multiplier rows of ``N M^{-1}`` are nonzero; their Gram matrix
    in the weighted norm is ``I - E (2 omega H + K - omega^2 beta I) E^T / omega^2``
    with ``E = Q^{-1/2} B^T S^{-1}``.
    """
    beta = cfg.beta if beta is None else beta
    if sys.m == 0:
        return 0.0
    G, B, H, K, qinv = _dense_blocks(sys, cfg.q)
    w = cfg.omega
    S = G + K / w
    E = (np.sqrt(qinv)[:, None] * B.T) @ np.linalg.inv(S)
    C = 2 * w * H + K - w * w * beta * np.eye(sys.n)
    gram = np.eye(sys.m) - E @ C @ E.T / (w * w)
    gram = 0.5 * (gram + gram.T)
    return float(math.sqrt(max(np.linalg.eigvalsh(gram)[-1], 0.0)))


@dataclass
class SpectralReport:
    omega: float
    delta: float
    beta: float
    eta: float
    lambda1: float
    mu_list: list
    rho_T: float
    v_T: float
    index_le_1: bool
    nm_norm: float
    nm_norm_reduced: float
    omega_max_exact: float
    delta_max_inexact: float
    s_rank: int
    full_rank: bool
    exact_converges: bool
    inexact_converges: bool
    q_structure: str
    notes: list = field(default_factory=list)


def theorem_conditions(sys: SaddleSystem, cfg: ALConfig) -> SpectralReport:
    """Every scalar needed to judge whether ``(omega, delta)`` is admissible."""
    eta = compute_eta(sys, cfg.q)
    lam1 = lambda1(sys, cfg)
    spec = iteration_matrix_spectrum(sys, cfg)
    T = iteration_matrix(sys, cfg)
    idx = index_one(T)
    full = spec.s_rank == sys.m
    nm = nm_norm(sys, cfg)
    nm_red = nm if full else nm_norm(sys, cfg, reduced=True)
    w = cfg.omega
    nm_use = nm if full else nm_red
    dmax = min(lam1 / (w * w), 0.5 * (1.0 - nm_use))
    wmax = omega_max_exact(eta)
    notes = []
    if full:
        exact_ok = spec.rho_T < 1.0
    else:
        exact_ok = idx and spec.v_T < 1.0
        notes.append("B is rank deficient: convergence is to some solution, judged by index and v(T)")
    if w >= wmax:
        notes.append(f"omega={w:g} is outside the admissible range (0, {wmax:g})")
    q_structure = "identity" if cfg.q.is_identity else "structure unverified"
    if not full and not cfg.q.is_identity:
        notes.append("Q is not the identity; block structure relative to the SVD of B is not verified")
    inexact_ok = exact_ok and cfg.delta <= dmax and w * w * cfg.beta < lam1
    return SpectralReport(
        omega=w,
        delta=cfg.delta,
        beta=cfg.beta,
        eta=eta,
        lambda1=lam1,
        mu_list=list(spec.mu),
        rho_T=spec.rho_T,
        v_T=spec.v_T,
        index_le_1=idx,
        nm_norm=nm,
        nm_norm_reduced=nm_red,
        omega_max_exact=wmax,
        delta_max_inexact=dmax,
        s_rank=spec.s_rank,
        full_rank=full,
        exact_converges=bool(exact_ok),
        inexact_converges=bool(inexact_ok),
        q_structure=q_structure,
        notes=notes,
    )


@dataclass
class Bb2ConditionReport:
    eigenvalues: list
    w_min: float
    w_max: float
    theta: list
    ratio: float
    condition_holds: bool
    strict_variant_holds: bool


def bb2_condition(a_hat) -> Bb2ConditionReport:
    """Sufficient condition for BB2 on a matrix with positive definite symmetric part.

    ``W = A_h^{-1} A^T A`` is similar to an SPD matrix, so its extremes come
    from the pencil ``(A^T A, A_h)``.
    """
    A = np.asarray(a_hat, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise AnalysisError(f"expected a nonempty square matrix, got shape {A.shape}")
    check_dense(A.shape[0])
    Ah = 0.5 * (A + A.T)
    hmin = float(np.linalg.eigvalsh(Ah)[0])
    if hmin <= 0:
        raise AnalysisError(f"symmetric part is not positive definite (smallest eigenvalue {hmin:.6g})")
    lam = sla.eigvals(A)
    u = lam.real
    mod2 = np.abs(lam) ** 2
    wv = sla.eigh(A.T @ A, Ah, eigvals_only=True)
    wmin, wmax = float(wv[0]), float(wv[-1])
    theta = np.maximum(1 - 2 * u / wmin + mod2 / wmin**2, 1 - 2 * u / wmax + mod2 / wmax**2)
    ratio = float(np.max(mod2 / u))
    Ainv = np.linalg.inv(A)
    sv = np.linalg.eigvalsh(Ainv + Ainv.T)
    return Bb2ConditionReport(
        eigenvalues=list(lam),
        w_min=wmin,
        w_max=wmax,
        theta=[float(t) for t in theta],
        ratio=ratio,
        condition_holds=bool(ratio < 2 * wmin),
        strict_variant_holds=bool(sv[-1] < 2 * sv[0]),
    )


@dataclass
class SpalbbConditionReport:
    lhs: float
    rhs: float
    holds: bool


def spalbb_condition_matrix(M) -> SpalbbConditionReport:
    """``max |lambda_j|^2 / Re lambda_j < 4 / lambda_max(M^{-1} + M^{-T})``."""
    M = np.asarray(M, dtype=np.float64)
    hmin = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
    if hmin <= 0:
        raise AnalysisError(f"symmetric part of M is not positive definite ({hmin:.6g})")
    lam = sla.eigvals(M)
    lhs = float(np.max(np.abs(lam) ** 2 / lam.real))
    Minv = np.linalg.inv(M)
    rhs = 4.0 / float(np.linalg.eigvalsh(Minv + Minv.T)[-1])
    return SpalbbConditionReport(lhs, rhs, bool(lhs < rhs))


def spalbb_condition(sys: SaddleSystem, cfg: ALConfig) -> SpalbbConditionReport:
    check_dense(sys.size)
    return spalbb_condition_matrix(ShiftedOperator.from_config(sys, cfg).dense())


@dataclass
class SvdBlockReport:
    s: int
    residual_range_component: list
    residual_null_component: list
    rank_ambiguous: bool


def residual_block_decomposition(sys: SaddleSystem, residuals) -> SvdBlockReport:
    """Split residuals in the singular bases of ``B``.

    With ``B = U S V^T``, ``(U^T r_x, V^T r_y)`` is cut after ``n + s``
    entries; the tail is the part of ``r_y`` in ``Null(B)``.
    """
    check_dense(sys.size)
    B = sys.B.to_dense()
    U, sig, V, s = _rank_split(B)
    ambiguous = False
    if sig.size and sig[0] > 0:
        kept = sig[s - 1] if s else sig[0]
        dropped = sig[s] if s < sig.size else 0.0
        ambiguous = bool(s > 0 and kept - dropped < RANK_RTOL * sig[0])
    a_part, b_part = [], []
    for r in residuals:
        rx, ry = sys.split(r)
        ty = V.T @ ry
        a = np.concatenate([U.T @ rx, ty[:s]])
        a_part.append(float(np.linalg.norm(a)))
        b_part.append(float(np.linalg.norm(ty[s:])))
    return SvdBlockReport(s, a_part, b_part, ambiguous)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (complex, np.complexfloating)):
        return [_jsonable(float(v.real)), _jsonable(float(v.imag))]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    return v


def to_json(obj, indent: Optional[int] = 2) -> str:
    """JSON text for report dataclasses; infinities become ``"inf"``, complex ``[re, im]``."""
    data = asdict(obj) if hasattr(obj, "__dataclass_fields__") else obj
    return json.dumps(_jsonable(data), indent=indent)
