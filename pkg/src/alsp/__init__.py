"""Augmented Lagrangian iterations for unsymmetric saddle-point systems."""

from .analysis import bb2_condition, compute_eta, iteration_matrix_spectrum, nm_norm, theorem_conditions
from .krylov import KrylovConfig, bicgstab, gmres_restarted
from .problems import ProblemSpec, generate, load
from .report import SolveReport
from .spal import spal_exact, spal_inexact
from .spalbb import bb1_divergence_demo, bb2_inner_solve, spalbb
from .sparse import SparseMatrix
from .system import ALConfig, QMode, SaddleSystem, ShiftedOperator, SplitOperator, WeightedNorm

__version__ = "0.1.0"

__all__ = [
    "ALConfig",
    "KrylovConfig",
    "ProblemSpec",
    "QMode",
    "SaddleSystem",
    "ShiftedOperator",
    "SolveReport",
    "SparseMatrix",
    "SplitOperator",
    "WeightedNorm",
    "bb1_divergence_demo",
    "bb2_condition",
    "bb2_inner_solve",
    "bicgstab",
    "compute_eta",
    "generate",
    "gmres_restarted",
    "iteration_matrix_spectrum",
    "load",
    "nm_norm",
    "spal_exact",
    "spal_inexact",
    "spalbb",
    "theorem_conditions",
]
