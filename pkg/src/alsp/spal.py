"""Augmented Lagrangian stationary iteration, exact and inexact.

The exact method solves ``M z_{k+1} = (f, omega Q y_k + g)`` with a dense LU
of ``M`` computed once.  The inexact method applies ``z_{k+1} = z_k - psi(r_k)``
where ``psi`` is any inner solver whose result satisfies

    ||r_k - M psi(r_k)|| <= delta ||r_k||

in a chosen norm; the contract is re-checked after every inner call.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dense import SingularMatrixError, check_dense, dense_lu, lu_solve
from .krylov import KrylovConfig, gmres_restarted
from .report import DIVERGENCE_LIMIT, SolveReport
from .system import (
    ALConfig,
    SaddleSystem,
    ShiftedOperator,
    WeightedNorm,
    residual,
    shifted_rhs,
)

EXACT_CAP = 5000

# slack on the inner contract, relative to ||r_k||, absorbing roundoff
CONTRACT_SLACK = 1e-10


@dataclass
class InnerSolveRequest:
    operator: ShiftedOperator
    rhs: np.ndarray
    warm_start: np.ndarray
    target: float
    norm: WeightedNorm
    max_iters: int = 100_000

    def __post_init__(self):
        if not self.target >= 0:
            raise ValueError("inner target must be nonnegative")


@dataclass
class InnerSolveResult:
    delta_z: np.ndarray
    inner_iters: float
    achieved_residual: float
    ok: bool = True
    message: str = ""


InnerSolver = Callable[[InnerSolveRequest], InnerSolveResult]


def _singular_message(sys: SaddleSystem, cfg: ALConfig, exc: SingularMatrixError) -> str:
    msg = f"shifted matrix M is singular at omega={cfg.omega:g}: {exc}"
    try:
        from .analysis import compute_eta

        eta = compute_eta(sys, cfg.q)
    except Exception:  # analysis is best effort here
        return msg
    if eta >= 0:
        return msg + "; eta >= 0 so every omega > 0 is admissible in exact arithmetic"
    return msg + f"; eta={eta:.6g}, admissible omega range is (0, {1.0 / (-2.0 * eta):.6g})"


def _factor_M(sys: SaddleSystem, cfg: ALConfig):
    check_dense(sys.size, "exact SPAL", EXACT_CAP)
    try:
        return dense_lu(ShiftedOperator.from_config(sys, cfg).dense())
    except SingularMatrixError as exc:
        exc.args = (_singular_message(sys, cfg, exc),)
        raise


def _initial(sys: SaddleSystem, z0=None, x0=None, y0=None) -> np.ndarray:
    if z0 is not None:
        z = np.array(z0, dtype=np.float64)
        sys.split(z)
        return z
    x = np.zeros(sys.n) if x0 is None else np.array(x0, dtype=np.float64)
    y = np.zeros(sys.m) if y0 is None else np.array(y0, dtype=np.float64)
    if x.size != sys.n or y.size != sys.m:
        raise ValueError(f"initial guess blocks have lengths {x.size}, {y.size}; expected {sys.n}, {sys.m}")
    return np.concatenate([x, y])


def _status(rel: float, tol: float, iters: float, maxit: int) -> Optional[str]:
    if rel <= tol:
        return "converged"
    if not np.isfinite(rel) or rel > DIVERGENCE_LIMIT:
        return "diverged"
    if iters >= maxit:
        return "maxit"
    return None


def spal_exact(sys: SaddleSystem, cfg: ALConfig, y0=None, x0=None, callback=None):
    """Exact SPAL.  Returns ``(z, report)``.

    ``callback(k, z_k, r_k)`` is invoked for every iterate including ``k = 0``.
    Raises ``SingularMatrixError`` when ``M`` cannot be factored; its message
    carries the admissible omega range when that can be computed.
    """
    t0 = time.perf_counter()
    lu = _factor_M(sys, cfg)
    z = _initial(sys, x0=x0, y0=y0)
    r = residual(sys, z)
    r0 = float(np.linalg.norm(r))
    history = [1.0 if r0 > 0 else 0.0]
    k = 0
    if callback is not None:
        callback(0, z, r)
    while True:
        status = _status(history[-1], cfg.tol, k, cfg.maxit)
        if status is not None:
            break
        z = lu_solve(lu, shifted_rhs(sys, cfg, z[sys.n:]))
        r = residual(sys, z)
        k += 1
        history.append(float(np.linalg.norm(r)) / r0)
        if callback is not None:
            callback(k, z, r)
    report = SolveReport(
        status=status,
        outer_iters=k,
        total_iters=float(k),
        final_relres=history[-1],
        residual_history=history,
        wall_seconds=time.perf_counter() - t0,
        method="spal_exact",
    )
    return z, report


def spal_inexact(
    sys: SaddleSystem,
    cfg: ALConfig,
    inner: InnerSolver,
    z0=None,
    norm: WeightedNorm | None = None,
    track_norm: WeightedNorm | None = None,
    delta_decay: float | None = None,
    callback=None,
):
    """Inexact SPAL with a pluggable inner solver.  Returns ``(z, report)``.

    ``norm`` is the contract norm (Euclidean by default).  When ``track_norm``
    is given, the residual norm in that weighting is recorded for every
    iterate under ``report.extras["tracked_norms"]``.  ``delta_decay``
    multiplies delta by that factor after each outer pass.
    """
    t0 = time.perf_counter()
    norm = norm or WeightedNorm.euclidean()
    op = ShiftedOperator.from_config(sys, cfg)
    z = _initial(sys, z0=z0)
    r = residual(sys, z)
    r0 = float(np.linalg.norm(r))
    history = [1.0 if r0 > 0 else 0.0]
    tracked = [track_norm(r)] if track_norm is not None else None
    inner_log = []
    total = 0.0
    k = 0
    failed = None
    message = ""
    warm = np.zeros(sys.size)
    delta = cfg.delta
    if callback is not None:
        callback(0, z, r)
    while True:
        status = _status(history[-1], cfg.tol, total, cfg.maxit)
        if status is not None:
            break
        r_star = norm(r)
        target = delta * r_star
        req = InnerSolveRequest(op, r, warm, target, norm, max_iters=int(cfg.maxit - total) or 1)
        res = inner(req)
        achieved = norm(r - op.apply(res.delta_z))
        res.achieved_residual = achieved
        total += res.inner_iters
        inner_log.append((res.inner_iters, achieved, target))
        if not res.ok or achieved > target + CONTRACT_SLACK * r_star:
            status = "breakdown"
            failed = k
            message = res.message or (
                f"inner solve at outer iteration {k} reached {achieved:.3e}, target {target:.3e}"
            )
            break
        z = z - res.delta_z
        warm = res.delta_z
        r = residual(sys, z)
        k += 1
        history.append(float(np.linalg.norm(r)) / r0)
        if tracked is not None:
            tracked.append(track_norm(r))
        if callback is not None:
            callback(k, z, r)
        if delta_decay is not None:
            delta *= delta_decay
    extras = {}
    if tracked is not None:
        extras["tracked_norms"] = tracked
    report = SolveReport(
        status=status,
        outer_iters=k,
        total_iters=total,
        final_relres=history[-1],
        residual_history=history,
        wall_seconds=time.perf_counter() - t0,
        method="spal_inexact",
        message=message,
        failed_outer_index=failed,
        inner_history=inner_log,
        extras=extras,
    )
    return z, report


def lu_inner(sys: SaddleSystem, cfg: ALConfig) -> InnerSolver:
    """Exact inner solve by a dense LU of M (one 'iteration' per call)."""
    lu = _factor_M(sys, cfg)

    def solve(req: InnerSolveRequest) -> InnerSolveResult:
        dz = lu_solve(lu, req.rhs)
        return InnerSolveResult(dz, 1, req.norm(req.rhs - req.operator.apply(dz)))

    return solve


def gmres_inner(restart: int = 20, max_rounds: int = 8) -> InnerSolver:
    """Restarted GMRES on ``M dz = r``.

    GMRES works in the 2-norm; if the contract norm differs, the tolerance
    is tightened tenfold and the solve resumed until the target is met.
    """

    def solve(req: InnerSolveRequest) -> InnerSolveResult:
        r_norm = float(np.linalg.norm(req.rhs))
        star = req.norm(req.rhs)
        if r_norm == 0.0:
            return InnerSolveResult(np.zeros_like(req.rhs), 0, 0.0)
        tol = max(req.target / star, 1e-14) if star > 0 else 1e-14
        dz = np.zeros_like(req.rhs)
        iters = 0
        achieved = star
        for _ in range(max_rounds):
            cap = max(int(req.max_iters - iters), 1)
            # tolerance is relative to the residual of the current guess
            cur = float(np.linalg.norm(req.rhs - req.operator.apply(dz)))
            if cur == 0.0:
                achieved = 0.0
                break
            cfg = KrylovConfig("gmres", restart=restart, tol=min(1.0, tol * r_norm / cur), maxit=cap)
            dz, rep = gmres_restarted(req.operator, req.rhs, dz, cfg)
            iters += rep.total_iters
            achieved = req.norm(req.rhs - req.operator.apply(dz))
            if achieved <= req.target or iters >= req.max_iters:
                break
            tol *= 0.1
        ok = achieved <= req.target + CONTRACT_SLACK * star
        msg = "" if ok else f"GMRES inner solve stalled at {achieved:.3e} (target {req.target:.3e})"
        return InnerSolveResult(dz, iters, achieved, ok, msg)

    return solve
