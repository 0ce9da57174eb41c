"""Progressive Hedging baseline.

The proximal term ``(rho/2)||x - z||^2`` is linear on binaries (``x^2 = x``)
and replaced by a piecewise-linear overestimate on other components, so
every subproblem stays a MILP.
"""
import math
import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ._blocks import SubproblemError, map_scenarios, scenario_block
from .mip import MilpProblem, solve_milp
from .mip.problem import BIN, CONT, INT, LE
from .pbgs import ConsensusEvaluation, evaluate_consensus

RESIDUAL_MET = "residual_met"
K_MAX = "k_max"
TIME_LIMIT = "time_limit"


@dataclass(frozen=True)
class PhParams:
    rho: float = 1.0
    eps: float = 1e-3
    k_max: int = 50
    breakpoints: int = 8
    threads: int = 1
    time_limit: Optional[float] = None
    seed: int = 0  # breakpoints are deterministic; kept for interface symmetry

    def validate(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.eps >= 0:
            raise ValueError("eps must be non-negative")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if self.breakpoints < 2:
            raise ValueError("need at least 2 breakpoints")


@dataclass
class Multipliers:
    omega: np.ndarray  # (S, n_x)
    probs: np.ndarray

    @property
    def lam(self):
        return self.probs[:, None] * self.omega

    def dual_residual(self):
        """``max_i |sum_s p_s omega_si|``."""
        return float(np.max(np.abs(self.probs @ self.omega), initial=0.0))


@dataclass
class PhReport:
    x: np.ndarray
    y: list
    z: np.ndarray
    omega: Multipliers
    residuals: List[float]
    dual_residuals: List[float]
    termination: str
    wall_time: float
    evaluation: Optional[ConsensusEvaluation]
    approximate: bool
    subproblem_solves: int = 0
    bb_nodes: int = 0

    @property
    def iterations(self):
        return len(self.residuals)

    @property
    def residual(self):
        return self.residuals[-1] if self.residuals else math.inf

    @property
    def converged(self):
        return self.termination == RESIDUAL_MET


def _breakpoints(lb, ub, kind, B):
    """Uniform breakpoints on ``[lb, ub]``; every integer point when an integer range fits in ``B``."""
    if kind == INT and ub - lb + 1 <= B:
        return np.arange(lb, ub + 1, dtype=float)
    return np.linspace(lb, ub, B)


def build_ph_subproblem(program, s, z, omega_s, rho, breakpoints=8):
    """Scenario ``s`` MILP for ``(c + omega_s) x + q_s y + (rho/2)||x - z||^2``.

    Binary components contribute ``(rho/2)(1 - 2 z_i) x_i`` plus the constant
    ``(rho/2) z_i^2``.  Other components get an epigraph column ``t_i >= 0``
    bounded below by the secants of ``(x_i - z_i)^2`` between consecutive
    breakpoints; the objective adds ``(rho/2) t_i``.  Column order is
    ``[x, y, t]``.
    """
    A, sense, rhs, lb, ub, kinds = scenario_block(program, s)
    n_x = program.n_x
    z = np.asarray(z, dtype=float)
    xlb, xub, xk = program.x_bounds
    half = 0.5 * rho
    c = np.concatenate([program.cost + np.asarray(omega_s, dtype=float), program.q_matrix[s]])
    offset = 0.0
    quad = [i for i in range(n_x) if xk[i] != BIN]
    for i in range(n_x):
        if xk[i] == BIN:
            c[i] += half * (1.0 - 2.0 * z[i])
            offset += half * z[i] * z[i]
    if not quad:
        return MilpProblem(c, A, sense, rhs, lb, ub, kinds, obj_offset=offset)
    rows, rhs_extra = [], []
    for t, i in enumerate(quad):
        if not (np.isfinite(xlb[i]) and np.isfinite(xub[i])):
            raise ValueError(f"x_{i} needs finite bounds for the piecewise-linear proximal term")
        bp = _breakpoints(xlb[i], xub[i], xk[i], breakpoints)
        if bp.size == 1:
            bp = np.array([bp[0], bp[0] + 1.0])
        for a, b in zip(bp[:-1], bp[1:]):
            slope = a + b - 2.0 * z[i]
            icept = (a - z[i]) ** 2 - slope * a
            row = np.zeros(A.shape[1] + len(quad))
            row[i] = slope
            row[A.shape[1] + t] = -1.0
            rows.append(row)
            rhs_extra.append(-icept)
    k = len(quad)
    A2 = np.zeros((A.shape[0] + len(rows), A.shape[1] + k))
    A2[: A.shape[0], : A.shape[1]] = A
    A2[A.shape[0] :] = np.array(rows)
    return MilpProblem(
        np.concatenate([c, np.full(k, half)]),
        A2,
        np.concatenate([sense, np.full(len(rows), LE, dtype=np.int8)]),
        np.concatenate([rhs, rhs_extra]),
        np.concatenate([lb, np.zeros(k)]),
        np.concatenate([ub, np.full(k, np.inf)]),
        np.concatenate([kinds, np.full(k, CONT, dtype=np.int8)]),
        obj_offset=offset,
    )


def _average(program, x):
    return np.array([math.fsum(p * x[s, i] for s, p in enumerate(program.probs)) for i in range(program.n_x)])


def run_ph(program, params=None, solver=None):
    """Progressive Hedging from penalty-free scenario solutions with ``omega = 0``."""
    params = params or PhParams()
    params.validate()
    solver = solver or solve_milp
    t0 = time.perf_counter()
    S, n_x, n_y = program.n_scenarios, program.n_x, program.n_y
    counters = {"solves": 0, "nodes": 0}

    def solve(s, prob, k):
        sol = solver(prob)
        if sol.status != "optimal":
            raise SubproblemError("ph", s, k, sol.status)
        return sol.x[:n_x], sol.x[n_x : n_x + n_y], sol.nodes

    def collect(res):
        counters["solves"] += len(res)
        counters["nodes"] += sum(r[2] for r in res)
        return np.array([r[0] for r in res]), [r[1] for r in res]

    def plain(s):
        A, sense, rhs, lb, ub, kinds = scenario_block(program, s)
        c = np.concatenate([program.cost, program.q_matrix[s]])
        return solve(s, MilpProblem(c, A, sense, rhs, lb, ub, kinds), 0)

    x, y = collect(map_scenarios(plain, S, params.threads))
    z = _average(program, x)
    mult = Multipliers(np.zeros((S, n_x)), program.probs)
    residuals = []
    dual_res = [mult.dual_residual()]  # one entry per multiplier iterate
    termination = K_MAX
    for k in range(1, params.k_max + 1):
        z_prev = z
        x, y = collect(map_scenarios(
            lambda s: solve(s, build_ph_subproblem(program, s, z_prev, mult.omega[s], params.rho, params.breakpoints), k),
            S,
            params.threads,
        ))
        z = _average(program, x)
        residuals.append(math.fsum(((x - z_prev) ** 2).ravel()))
        if residuals[-1] <= params.eps:
            termination = RESIDUAL_MET
            break
        if k == params.k_max:
            break
        if params.time_limit is not None and time.perf_counter() - t0 > params.time_limit:
            termination = TIME_LIMIT
            break
        mult = Multipliers(mult.omega + params.rho * (x - z), program.probs)
        dual_res.append(mult.dual_residual())
    wall = time.perf_counter() - t0
    evaluation = evaluate_consensus(program, z, solver=solver, threads=params.threads)
    approximate = bool(np.any(program.x_bounds[2] != BIN))
    return PhReport(x, y, z, mult, residuals, dual_res, termination, wall, evaluation, approximate,
                    counters["solves"], counters["nodes"])
