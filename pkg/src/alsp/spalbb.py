"""Barzilai-Borwein steppers and the augmented Lagrangian BB method.

The inner solver applies gradient-type steps ``z <- z - alpha (M z - l_k)``
to the shifted system.  The BB2 stepsize ``s^T d / d^T d`` with ``d = M s``
is used whenever a previous iterate exists; otherwise the minimal-gradient
stepsize ``rho^T M rho / ||M rho||^2`` bootstraps the sequence.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .report import DIVERGENCE_LIMIT, SolveReport
from .spal import InnerSolveRequest, InnerSolveResult
from .system import ALConfig, SaddleSystem, ShiftedOperator, as_apply, residual, shifted_rhs

TINY = 1e-300


@dataclass
class BBStepsizes:
    bb1: float
    bb2: float
    mg: float


def bb_stepsizes(s, d, rho=None, m_rho=None) -> BBStepsizes:
    """All three stepsizes from a secant pair ``(s, d)`` and a residual."""
    sd = float(s @ d)
    bb1 = float(s @ s) / sd if sd != 0 else np.inf
    bb2 = sd / float(d @ d) if float(d @ d) > 0 else np.inf
    mg = np.nan
    if rho is not None and m_rho is not None and float(m_rho @ m_rho) > 0:
        mg = float(rho @ m_rho) / float(m_rho @ m_rho)
    return BBStepsizes(bb1, bb2, mg)


@dataclass
class BBState:
    """Iterate history carried across inner solves.

    ``mz_prev``/``mz_cur`` cache ``M z`` so the secant vector ``d`` costs no
    extra product.
    """

    z_prev: Optional[np.ndarray]
    z_cur: np.ndarray
    mz_prev: Optional[np.ndarray]
    mz_cur: np.ndarray
    alpha: float = 0.0
    step_kind: str = "mg"
    alphas: list = field(default_factory=list)
    kinds: list = field(default_factory=list)
    record: bool = False

    @classmethod
    def start(cls, apply, z0, z_minus1=None, record=False) -> "BBState":
        A = as_apply(apply)
        z0 = np.array(z0, dtype=np.float64)
        if z_minus1 is None:
            return cls(None, z0, None, A(z0), record=record)
        zm = np.array(z_minus1, dtype=np.float64)
        return cls(zm, z0, A(zm), A(z0), record=record)


def _bb2_steps(A, ell, state: BBState, target: float, max_iters: int, trace=None):
    """Run BB2 steps on ``A z = ell`` from ``state`` until ``||A z - ell|| <= target``.

    Returns ``(iterations, final residual norm, reached)``.  The cached
    ``A z`` is refreshed from scratch before declaring success.
    """
    z, mz = state.z_cur, state.mz_cur
    rho = mz - ell
    res = float(np.linalg.norm(rho))
    it = 0
    while True:
        if res <= target:
            mz = A(z)
            rho = mz - ell
            res = float(np.linalg.norm(rho))
            if res <= target:
                break
        if it >= max_iters or not np.isfinite(res):
            break
        m_rho = A(rho)
        kind = "mg"
        alpha = 0.0
        if state.z_prev is not None:
            s = z - state.z_prev
            d = mz - state.mz_prev
            sd = float(s @ d)
            if np.linalg.norm(s) > TINY and sd > 0:
                alpha = sd / float(d @ d)
                kind = "bb2"
        if kind == "mg":
            mm = float(m_rho @ m_rho)
            if mm <= 0:
                break
            alpha = float(rho @ m_rho) / mm
        state.z_prev, state.mz_prev = z, mz
        z = z - alpha * rho
        mz = mz - alpha * m_rho
        rho = mz - ell
        res = float(np.linalg.norm(rho))
        it += 1
        state.alpha, state.step_kind = alpha, kind
        if state.record:
            state.alphas.append(alpha)
            state.kinds.append(kind)
        if trace is not None:
            trace.append(res)
    state.z_cur, state.mz_cur = z, mz
    return it, res, res <= target


def bb2_inner_solve(op, ell_k, state: BBState, target: float, max_iters: int = 100_000, trace=None):
    """BB2 iterations on ``M z = ell_k`` starting from ``state.z_cur``.

    Returns ``(InnerSolveResult, state)``; ``delta_z`` is the decrease of the
    iterate, so the caller's update ``z - delta_z`` lands on ``state.z_cur``.
    """
    if not target >= 0:
        raise ValueError("target must be nonnegative")
    A = as_apply(op)
    z_start = state.z_cur
    it, res, ok = _bb2_steps(A, np.asarray(ell_k, dtype=np.float64), state, target, max_iters, trace)
    msg = "" if ok else f"BB2 inner solve hit its cap of {max_iters} iterations at residual {res:.3e}"
    return InnerSolveResult(z_start - state.z_cur, it, res, ok, msg), state


def spalbb(
    sys: SaddleSystem,
    cfg: ALConfig,
    z0=None,
    z_minus1=None,
    record_steps: bool = False,
    record_inner: bool = False,
    callback=None,
):
    """Augmented Lagrangian outer loop with BB2 inner solves.  Returns ``(z, report)``.

    Each outer pass freezes ``r_k = A z_k - l`` and runs BB2 on
    ``M z = (f, omega Q y_k + g)`` until ``||M z - l_k|| <= delta ||r_k||``.
    ``total_iters`` counts every inner BB step.
    """
    t0 = time.perf_counter()
    op = ShiftedOperator.from_config(sys, cfg)
    z = np.zeros(sys.size) if z0 is None else np.array(z0, dtype=np.float64)
    sys.split(z)
    state = BBState.start(op, z, z_minus1, record=record_steps)
    r = residual(sys, z)
    r0 = float(np.linalg.norm(r))
    history = [1.0 if r0 > 0 else 0.0]
    inner_trace = [] if record_inner else None
    inner_counts = []
    total = 0
    k = 0
    message = ""
    if callback is not None:
        callback(0, z, r)
    while True:
        rel = history[-1]
        if rel <= cfg.tol:
            status = "converged"
            break
        if not np.isfinite(rel) or rel > DIVERGENCE_LIMIT:
            status = "diverged"
            break
        if total >= cfg.maxit:
            status = "maxit"
            break
        ell_k = shifted_rhs(sys, cfg, z[sys.n:])
        target = cfg.delta * float(np.linalg.norm(r))
        res, state = bb2_inner_solve(op, ell_k, state, target, cfg.maxit - total, inner_trace)
        total += res.inner_iters
        inner_counts.append(res.inner_iters)
        z = state.z_cur
        r = residual(sys, z)
        k += 1
        history.append(float(np.linalg.norm(r)) / r0)
        if callback is not None:
            callback(k, z, r)
        if not res.ok:
            message = res.message
            rel = history[-1]
            if rel <= cfg.tol:
                status = "converged"
            elif not np.isfinite(res.achieved_residual):
                status = "diverged"
            else:
                status = "maxit" if total >= cfg.maxit else "breakdown"
            break
    extras = {"inner_iters": inner_counts}
    if record_steps:
        extras["alphas"] = state.alphas
        extras["step_kinds"] = state.kinds
    report = SolveReport(
        status=status,
        outer_iters=k,
        total_iters=float(total),
        final_relres=history[-1],
        residual_history=history,
        wall_seconds=time.perf_counter() - t0,
        method="spalbb",
        message=message,
        inner_history=inner_trace if inner_trace is not None else [],
        extras=extras,
    )
    return z, report


def bb2_inner(max_rounds_iters: int = 100_000):
    """BB2 on ``M dz = r`` from ``dz = 0`` as an inner solver for inexact SPAL."""

    def solve(req: InnerSolveRequest) -> InnerSolveResult:
        if req.norm.kind != "euclidean":
            raise ValueError("the BB2 inner solver measures residuals in the 2-norm")
        A = as_apply(req.operator)
        state = BBState.start(A, np.zeros_like(req.rhs))
        it, res, ok = _bb2_steps(A, req.rhs, state, req.target, min(req.max_iters, max_rounds_iters))
        msg = "" if ok else f"BB2 inner solve stopped at {res:.3e} (target {req.target:.3e})"
        return InnerSolveResult(state.z_cur, it, res, ok, msg)

    return solve


@dataclass
class BBRun:
    z: np.ndarray
    iterations: int
    converged: bool
    residual_norms: list
    alphas: list
    kinds: list


def bb_solve(apply, ell, z0, rule: str = "bb2", tol: float = 1e-10, maxit: int = 500) -> BBRun:
    """Standalone gradient stepper on ``A z = ell`` with BB1, BB2 or MG steps.

    The first step (no secant pair yet) always uses the minimal-gradient
    stepsize for ``bb2``/``mg`` and ``r^T r / r^T A r`` for ``bb1``.
    Stops when ``||A z - ell|| <= tol ||A z0 - ell||``.
    """
    if rule not in ("bb1", "bb2", "mg"):
        raise ValueError(f"unknown stepsize rule {rule!r}")
    A = as_apply(apply)
    ell = np.asarray(ell, dtype=np.float64)
    z = np.array(z0, dtype=np.float64)
    az = A(z)
    rho = az - ell
    norms = [float(np.linalg.norm(rho))]
    stop = tol * norms[0]
    alphas, kinds = [], []
    s = d = None
    it = 0
    while norms[-1] > stop and it < maxit and np.isfinite(norms[-1]):
        a_rho = A(rho)
        kind = rule
        if s is None or rule == "mg":
            kind = "mg" if rule != "bb1" else "cauchy"
        else:
            st = bb_stepsizes(s, d)
            alpha = st.bb1 if rule == "bb1" else st.bb2
            if not (np.isfinite(alpha) and alpha > 0):
                kind = "mg" if rule != "bb1" else "cauchy"
        if kind == "mg":
            alpha = float(rho @ a_rho) / float(a_rho @ a_rho)
        elif kind == "cauchy":
            alpha = float(rho @ rho) / float(rho @ a_rho)
        # secant pair from the step itself; differencing z and A z cancels badly
        s, d = -alpha * rho, -alpha * a_rho
        z = z - alpha * rho
        az = az - alpha * a_rho
        rho = az - ell
        norms.append(float(np.linalg.norm(rho)))
        alphas.append(alpha)
        kinds.append(kind)
        it += 1
    final = float(np.linalg.norm(A(z) - ell))
    norms[-1] = final
    return BBRun(z, it, final <= stop, norms, alphas, kinds)


BB1_CLAIMED_SQUARED_GROWTH = 8.0


@dataclass
class BB1DemoReport:
    trajectory: list
    alphas: list
    norm_ratios: list
    squared_ratios: list
    claimed_squared_growth: float
    observed_squared_growth: Optional[float]
    discrepancy: bool
    note: str


def bb1_divergence_demo(z0=(1.0, 0.0), steps: int = 3) -> BB1DemoReport:
    """BB1 on ``[[1, 2], [-2, 1]] z = 0``.

    The symmetric part is the identity, so every BB1 stepsize is 1 and one
    step maps ``(x, y)`` to ``(-2y, 2x)``: the norm doubles each step.
    """
    from .problems import BB1_MATRIX

    A = np.array(BB1_MATRIX, dtype=np.float64)
    z = np.array(z0, dtype=np.float64)
    traj = [z.copy()]
    alphas = []
    if not np.any(z):
        return BB1DemoReport(
            [z.copy() for _ in range(steps + 1)], [], [], [], BB1_CLAIMED_SQUARED_GROWTH, None, False,
            "zero start is the solution; no divergence",
        )
    z_prev = None
    for _ in range(steps):
        r = A @ z
        if z_prev is None:
            alpha = float(r @ r) / float(r @ A @ r)
        else:
            s = z - z_prev
            alpha = float(s @ s) / float(s @ A @ s)
        z_prev = z
        z = z - alpha * r
        alphas.append(alpha)
        traj.append(z.copy())
    norms = [float(np.linalg.norm(t)) for t in traj]
    ratios = [b / a for a, b in zip(norms, norms[1:])]
    sq = [x * x for x in ratios]
    observed = sq[0] if sq and all(q == sq[0] for q in sq) else None
    disc = observed is not None and observed != BB1_CLAIMED_SQUARED_GROWTH
    note = (
        f"squared norm grows by {observed:g} per step, not {BB1_CLAIMED_SQUARED_GROWTH:g}"
        if disc
        else "squared norm growth matches the stated factor"
    )
    return BB1DemoReport(traj, alphas, ratios, sq, BB1_CLAIMED_SQUARED_GROWTH, observed, disc, note)
