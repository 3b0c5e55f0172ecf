"""Restarted GMRES and BiCGSTAB baselines over a matrix-free operator.

Both report relative residuals against ``||r_0||`` and re-check the true
residual before declaring convergence, so ``final_relres`` is never a
recurrence estimate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .report import DIVERGENCE_LIMIT, SolveReport
from .system import as_apply

TINY = 1e-300


@dataclass(frozen=True)
class KrylovConfig:
    method: str = "gmres"
    restart: int = 20
    tol: float = 1e-6
    maxit: int = 100_000

    def __post_init__(self):
        if self.method not in ("gmres", "bicgstab"):
            raise ValueError(f"unknown Krylov method {self.method!r}")
        if self.restart < 1:
            raise ValueError("restart must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


def _start(apply, ell, z0):
    b = np.asarray(ell, dtype=np.float64)
    x = np.zeros_like(b) if z0 is None else np.array(z0, dtype=np.float64)
    if x.shape != b.shape:
        raise ValueError(f"initial guess has shape {x.shape}, right-hand side {b.shape}")
    r = b - apply(x)
    return b, x, r, float(np.linalg.norm(r))


def _bad(rel: float) -> bool:
    return not np.isfinite(rel) or rel > DIVERGENCE_LIMIT


def gmres_restarted(apply, ell, z0=None, cfg: KrylovConfig | None = None, callback=None):
    """GMRES(restart) with modified Gram-Schmidt and Givens rotations.

    Returns ``(z, report)``.  Each Arnoldi step counts as one iteration.
    ``callback(total_iters, relres_estimate)`` is called after every step.
    """
    cfg = cfg or KrylovConfig("gmres")
    A = as_apply(apply)
    t0 = time.perf_counter()
    b, x, r, beta0 = _start(A, ell, z0)
    k = cfg.restart
    history = [1.0]
    total = cycles = 0
    status = None

    if beta0 == 0.0:
        history = [0.0]
        status = "converged"

    broke_down = False
    while status is None:
        if cycles:
            r = b - A(x)
            history[-1] = float(np.linalg.norm(r)) / beta0
        rel = history[-1]
        if rel <= cfg.tol:
            status = "converged"
            break
        if broke_down:
            status = "breakdown"
            break
        if _bad(rel):
            status = "diverged"
            break
        if total >= cfg.maxit:
            status = "maxit"
            break

        cycles += 1
        beta = float(np.linalg.norm(r))
        V = np.zeros((k + 1, b.size))
        H = np.zeros((k + 1, k))
        cs = np.zeros(k)
        sn = np.zeros(k)
        gam = np.zeros(k + 1)
        V[0] = r / beta
        gam[0] = beta
        steps = 0
        for j in range(min(k, cfg.maxit - total)):
            w = A(V[j])
            w_norm0 = float(np.linalg.norm(w))
            for i in range(j + 1):
                H[i, j] = V[i] @ w
                w -= H[i, j] * V[i]
            h_next = float(np.linalg.norm(w))
            H[j + 1, j] = h_next
            for i in range(j):
                hij = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = hij
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            gam[j + 1] = -sn[j] * gam[j]
            gam[j] = cs[j] * gam[j]
            total += 1
            steps = j + 1
            est = abs(gam[j + 1]) / beta0
            history.append(est)
            if callback is not None:
                callback(total, est)
            if h_next <= 1e-14 * max(w_norm0, TINY):
                broke_down = True
                break
            if est <= cfg.tol:
                break
            V[j + 1] = w / h_next

        Hs = H[:steps, :steps]
        if np.all(np.abs(np.diag(Hs)) > 0):
            y = solve_triangular(Hs, gam[:steps])
        else:
            y = np.linalg.lstsq(Hs, gam[:steps], rcond=None)[0]
        x += V[:steps].T @ y

    report = SolveReport(
        status=status,
        outer_iters=cycles,
        total_iters=float(total),
        final_relres=history[-1],
        residual_history=history,
        wall_seconds=time.perf_counter() - t0,
        method=f"gmres({k})",
    )
    return x, report


def bicgstab(apply, ell, z0=None, cfg: KrylovConfig | None = None, callback=None):
    """BiCGSTAB counted in half-iterations (0.5 per matrix-vector product).

    Returns ``(z, report)``.
    """
    cfg = cfg or KrylovConfig("bicgstab")
    A = as_apply(apply)
    t0 = time.perf_counter()
    b, x, r, beta0 = _start(A, ell, z0)
    history = [1.0]
    total = 0.0
    status = None
    restarts = 0

    if beta0 == 0.0:
        history = [0.0]
        status = "converged"

    def true_rel(xv):
        return float(np.linalg.norm(b - A(xv))) / beta0

    fresh = True
    rhat = r.copy()
    p = v = None
    rho_old = alpha = omega = 1.0
    while status is None:
        if total >= cfg.maxit:
            status = "maxit"
            break
        rho = float(rhat @ r)
        if abs(rho) < TINY:
            status = "breakdown"
            break
        if fresh:
            p = r.copy()
            fresh = False
        else:
            beta = (rho / rho_old) * (alpha / omega)
            p = r + beta * (p - omega * v)
        v = A(p)
        denom = float(rhat @ v)
        if abs(denom) < TINY:
            status = "breakdown"
            break
        alpha = rho / denom
        s = r - alpha * v
        total += 0.5
        rel = float(np.linalg.norm(s)) / beta0
        history.append(rel)
        if callback is not None:
            callback(total, rel)
        if rel <= cfg.tol:
            x = x + alpha * p
            history[-1] = true_rel(x)
            if history[-1] <= cfg.tol:
                status = "converged"
                break
            r = b - A(x)
            rhat, fresh, restarts = r.copy(), True, restarts + 1
            continue
        t = A(s)
        tt = float(t @ t)
        omega = float(t @ s) / tt if tt > TINY else 0.0
        if abs(omega) < TINY:
            x = x + alpha * p
            history[-1] = true_rel(x)
            status = "converged" if history[-1] <= cfg.tol else "breakdown"
            break
        x = x + alpha * p + omega * s
        r = s - omega * t
        total += 0.5
        rel = float(np.linalg.norm(r)) / beta0
        history.append(rel)
        if callback is not None:
            callback(total, rel)
        if _bad(rel):
            status = "diverged"
            break
        if rel <= cfg.tol:
            history[-1] = true_rel(x)
            if history[-1] <= cfg.tol:
                status = "converged"
                break
            r = b - A(x)
            rhat, fresh, restarts = r.copy(), True, restarts + 1
            continue
        rho_old = rho

    if beta0 > 0:
        history[-1] = true_rel(x)
    report = SolveReport(
        status=status,
        outer_iters=0,
        total_iters=total,
        final_relres=history[-1],
        residual_history=history,
        wall_seconds=time.perf_counter() - t0,
        method="bicgstab",
        extras={"restarts": restarts},
    )
    return x, report


def solve(apply, ell, z0=None, cfg: KrylovConfig | None = None, callback=None):
    cfg = cfg or KrylovConfig()
    fn = gmres_restarted if cfg.method == "gmres" else bicgstab
    return fn(apply, ell, z0, cfg, callback)
