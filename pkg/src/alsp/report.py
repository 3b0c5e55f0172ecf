from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

STATUSES = ("converged", "maxit", "breakdown", "diverged")

# relres beyond this (or non-finite) is reported as divergence
DIVERGENCE_LIMIT = 1e10


@dataclass
class SolveReport:
    """Outcome of one solve.

    ``residual_history`` holds ``||r_k|| / ||r_0||`` and starts at 1 (at 0
    when ``r_0`` is already zero); ``total_iters`` may be a half-integer for
    BiCGSTAB.
    """

    status: str
    outer_iters: int
    total_iters: float
    final_relres: float
    residual_history: list = field(default_factory=list)
    wall_seconds: float = 0.0
    method: str = ""
    message: str = ""
    failed_outer_index: Optional[int] = None
    inner_history: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def summary(self) -> str:
        return (
            f"{self.method or 'solve'}: {self.status} oiter={self.outer_iters} "
            f"titer={format_titer(self.total_iters)} res={self.final_relres:.3e} "
            f"cpu={self.wall_seconds:.3f}s"
        )


def format_titer(t: float) -> str:
    return str(int(t)) if float(t).is_integer() else f"{t:.1f}"
