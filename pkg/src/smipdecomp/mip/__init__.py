"""Embedded LP / MILP solver."""
from ._kernels import BACKEND
from .bnb import solve_milp
from .lp import LpWorkspace, solve_lp
from .problem import (
    BIN,
    CONT,
    EQ,
    GE,
    INFEASIBLE,
    INT,
    ITERATION_LIMIT,
    LE,
    OPTIMAL,
    UNBOUNDED,
    MilpProblem,
    MilpSolution,
)

__all__ = [
    "BACKEND",
    "BIN",
    "CONT",
    "EQ",
    "GE",
    "INFEASIBLE",
    "INT",
    "ITERATION_LIMIT",
    "LE",
    "OPTIMAL",
    "UNBOUNDED",
    "LpWorkspace",
    "MilpProblem",
    "MilpSolution",
    "solve_lp",
    "solve_milp",
]
