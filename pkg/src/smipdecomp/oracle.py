"""Exact reference values for small instances.

Extensive-form optimum, LP multipliers of the non-anticipativity rows,
Lagrangian and augmented Lagrangian bounds at fixed multipliers, and the
smallest penalty on a grid that closes the duality gap.
"""
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ._blocks import SubproblemError, map_scenarios, scenario_block, with_discrepancy_columns
from .mip import MilpProblem, solve_lp, solve_milp
from .mip.problem import CONT, EQ, GE

DUAL_FEAS_TOL = 1e-7


@dataclass
class ExactSolution:
    status: str
    objective: float
    x: Optional[np.ndarray]
    y: Optional[list]
    bound: float
    nodes: int


@dataclass
class DualityStudy:
    rho_grid: List[float]
    values: List[float]
    zeta_sip: float
    threshold: Optional[float]
    omega: np.ndarray
    tol: float

    @property
    def monotone(self):
        return all(b >= a - self.tol for a, b in zip(self.values, self.values[1:]))

    @property
    def bounded(self):
        return all(v <= self.zeta_sip + self.tol for v in self.values)


def build_extensive_form(program):
    """One MILP over ``[x, y_1, ..., y_S]`` with probability-weighted recourse costs."""
    n_x, n_y, S = program.n_x, program.n_y, program.n_scenarios
    A1, sense1, rhs1 = program.first_stage_matrix
    blocks = [program.scenario_matrix(s) for s in range(S)]
    m = A1.shape[0] + sum(b[0].shape[0] for b in blocks)
    N = n_x + S * n_y
    A = np.zeros((m, N))
    A[: A1.shape[0], :n_x] = A1
    senses, rhss = [sense1], [rhs1]
    r = A1.shape[0]
    for s, (T, W, sense, rhs) in enumerate(blocks):
        k = T.shape[0]
        A[r : r + k, :n_x] = T
        A[r : r + k, n_x + s * n_y : n_x + (s + 1) * n_y] = W
        senses.append(sense)
        rhss.append(rhs)
        r += k
    c = np.concatenate([program.cost] + [p * program.q_matrix[s] for s, p in enumerate(program.probs)])
    xlb, xub, xk = program.x_bounds
    ybs = [program.y_bounds(s) for s in range(S)]
    return MilpProblem(
        c,
        A,
        np.concatenate(senses),
        np.concatenate(rhss),
        np.concatenate([xlb] + [b[0] for b in ybs]),
        np.concatenate([xub] + [b[1] for b in ybs]),
        np.concatenate([xk] + [b[2] for b in ybs]),
    )


def solve_exact(program, solver=None):
    """Optimal value ``zeta_SIP`` and solution of the extensive form."""
    ef = build_extensive_form(program)
    sol = (solver or solve_milp)(ef)
    n_x, n_y = program.n_x, program.n_y
    if sol.x is None:
        return ExactSolution(sol.status, sol.objective, None, None, sol.bound, sol.nodes)
    ys = [sol.x[n_x + s * n_y : n_x + (s + 1) * n_y] for s in range(program.n_scenarios)]
    return ExactSolution(sol.status, sol.objective, sol.x[:n_x], ys, sol.bound, sol.nodes)


def build_split_form(program, relax=False):
    """Split-variable MILP over ``[x_1, y_1, ..., x_S, y_S, z]`` with rows ``x_s - z = 0`` last.

    ``z`` is free; the last ``S * n_x`` rows are the non-anticipativity rows.
    """
    n_x, n_y, S = program.n_x, program.n_y, program.n_scenarios
    blocks = [scenario_block(program, s) for s in range(S)]
    width = n_x + n_y
    N = S * width + n_x
    m = sum(b[0].shape[0] for b in blocks) + S * n_x
    A = np.zeros((m, N))
    senses, rhss, lbs, ubs, kinds, costs = [], [], [], [], [], []
    r = 0
    for s, (As, sense, rhs, lb, ub, kd) in enumerate(blocks):
        k = As.shape[0]
        A[r : r + k, s * width : (s + 1) * width] = As
        r += k
        senses.append(sense)
        rhss.append(rhs)
        lbs.append(lb)
        ubs.append(ub)
        kinds.append(kd)
        p = program.probs[s]
        costs.append(np.concatenate([p * program.cost, p * program.q_matrix[s]]))
    for s in range(S):
        for i in range(n_x):
            A[r, s * width + i] = 1.0
            A[r, S * width + i] = -1.0
            r += 1
    kinds.append(np.zeros(n_x, dtype=np.int8))
    kind = np.concatenate(kinds)
    if relax:
        kind = np.zeros_like(kind)
    return MilpProblem(
        np.concatenate(costs + [np.zeros(n_x)]),
        A,
        np.concatenate(senses + [np.full(S * n_x, EQ, dtype=np.int8)]),
        np.concatenate(rhss + [np.zeros(S * n_x)]),
        np.concatenate(lbs + [np.full(n_x, -np.inf)]),
        np.concatenate(ubs + [np.full(n_x, np.inf)]),
        kind,
    )


def lp_nac_multipliers(program):
    """``omega_s = lambda_s / p_s`` from the non-anticipativity duals of the split LP relaxation.

    Returns ``(omega, lp_value)``.
    """
    prob = build_split_form(program, relax=True)
    sol = solve_lp(prob)
    if sol.status != "optimal":
        raise RuntimeError(f"split-variable LP relaxation is {sol.status}")
    S, n_x = program.n_scenarios, program.n_x
    lam = sol.duals[-S * n_x :].reshape(S, n_x)
    omega = lam / program.probs[:, None]
    check = _dual_residual(program, omega)
    if check > DUAL_FEAS_TOL:  # pragma: no cover - follows from LP stationarity in z
        raise RuntimeError(f"LP multipliers violate sum p_s omega_s = 0 by {check:.3g}")
    return omega, sol.objective


def _dual_residual(program, omega):
    omega = np.asarray(omega, dtype=float)
    return float(np.max(np.abs(program.probs @ omega), initial=0.0))


def lagrangian_bound(program, omega, relax=False, solver=None, threads=1):
    """``sum_s p_s min {(c + omega_s) x + q_s y : (x, y) in scenario s}``.

    With ``relax=True`` the scenario problems are solved as LPs.
    """
    omega = np.broadcast_to(np.asarray(omega, dtype=float), (program.n_scenarios, program.n_x))
    if _dual_residual(program, omega) > DUAL_FEAS_TOL:
        raise ValueError("omega not dual feasible: sum_s p_s omega_s != 0")
    zeros = np.zeros(program.n_x)
    solve = solve_lp if relax else (solver or solve_milp)

    def one(s):
        prob = with_discrepancy_columns(program, s, program.cost + omega[s], zeros, zeros, zeros)
        sol = solve(prob)
        if sol.status != "optimal":
            raise SubproblemError("lagrangian_bound", s, 0, sol.status)
        return sol.objective

    vals = map_scenarios(one, program.n_scenarios, threads)
    return math.fsum(p * v for p, v in zip(program.probs, vals))


def build_augmented_dual(program, omega, rho_lo, rho_hi):
    """Joint MILP over ``[x_s, y_s, w_lo_s, w_hi_s]_s`` and ``z``.

    Objective ``sum_s p_s ((c + omega_s) x_s + q_s y_s) + rho_lo_s w_lo_s + rho_hi_s w_hi_s``
    with ``w_lo_s >= z - x_s`` and ``w_hi_s >= x_s - z``.  ``z`` is
    continuous and bounded by the first-stage bounds.
    """
    n_x, n_y, S = program.n_x, program.n_y, program.n_scenarios
    omega = np.broadcast_to(np.asarray(omega, dtype=float), (S, n_x))
    rho_lo = np.broadcast_to(np.asarray(rho_lo, dtype=float), (S, n_x))
    rho_hi = np.broadcast_to(np.asarray(rho_hi, dtype=float), (S, n_x))
    blocks = [scenario_block(program, s) for s in range(S)]
    width = n_x + n_y + 2 * n_x
    N = S * width + n_x
    zc = S * width
    m = sum(b[0].shape[0] for b in blocks) + 2 * S * n_x
    A = np.zeros((m, N))
    senses, rhss, lbs, ubs, kinds, costs = [], [], [], [], [], []
    r = 0
    eye = np.eye(n_x)
    for s, (As, sense, rhs, lb, ub, kd) in enumerate(blocks):
        base = s * width
        k = As.shape[0]
        A[r : r + k, base : base + n_x + n_y] = As
        r += k
        # w_lo + x - z >= 0
        A[r : r + n_x, base : base + n_x] = eye
        A[r : r + n_x, base + n_x + n_y : base + n_x + n_y + n_x] = eye
        A[r : r + n_x, zc:] = -eye
        r += n_x
        # w_hi - x + z >= 0
        A[r : r + n_x, base : base + n_x] = -eye
        A[r : r + n_x, base + 2 * n_x + n_y : base + width] = eye
        A[r : r + n_x, zc:] = eye
        r += n_x
        senses += [sense, np.full(2 * n_x, GE, dtype=np.int8)]
        rhss += [rhs, np.zeros(2 * n_x)]
        lbs += [lb, np.zeros(2 * n_x)]
        ubs += [ub, np.full(2 * n_x, np.inf)]
        kinds += [kd, np.zeros(2 * n_x, dtype=np.int8)]
        p = program.probs[s]
        costs += [p * (program.cost + omega[s]), p * program.q_matrix[s], rho_lo[s], rho_hi[s]]
    xlb, xub, _ = program.x_bounds
    return MilpProblem(
        np.concatenate(costs + [np.zeros(n_x)]),
        A,
        np.concatenate(senses),
        np.concatenate(rhss),
        np.concatenate(lbs + [xlb]),
        np.concatenate(ubs + [xub]),
        np.concatenate(kinds + [np.full(n_x, CONT, dtype=np.int8)]),
    )


def augmented_dual_value(program, omega, rho_lo, rho_hi=None, solver=None):
    """Optimal value of the augmented Lagrangian relaxation at fixed ``omega`` and weights."""
    if rho_hi is None:
        rho_hi = rho_lo
    if _dual_residual(program, np.broadcast_to(np.asarray(omega, dtype=float), (program.n_scenarios, program.n_x))) > DUAL_FEAS_TOL:
        raise ValueError("omega not dual feasible: sum_s p_s omega_s != 0")
    if np.any(np.asarray(rho_lo) <= 0) or np.any(np.asarray(rho_hi) <= 0):
        raise ValueError("penalty weights must be positive")
    sol = (solver or solve_milp)(build_augmented_dual(program, omega, rho_lo, rho_hi))
    if sol.status != "optimal":
        raise RuntimeError(f"augmented dual MILP ended with status {sol.status}")
    return sol.objective


def find_exactness_threshold(program, omega=None, rho_grid=None, zeta_sip=None, tol=1e-6, solver=None):
    """Evaluate the augmented dual with uniform weights ``rho`` over ``rho_grid``.

    ``threshold`` is the first grid value whose dual value reaches
    ``zeta_SIP`` within ``tol``, or ``None``.
    """
    if rho_grid is None:
        rho_grid = [0.5 * 2**k for k in range(10)]
    rho_grid = [float(r) for r in rho_grid]
    if any(r <= 0 for r in rho_grid) or any(b <= a for a, b in zip(rho_grid, rho_grid[1:])):
        raise ValueError("rho grid must be positive and increasing")
    S, n_x = program.n_scenarios, program.n_x
    omega = np.zeros((S, n_x)) if omega is None else np.broadcast_to(np.asarray(omega, dtype=float), (S, n_x))
    if zeta_sip is None:
        zeta_sip = solve_exact(program, solver=solver).objective
    values, threshold = [], None
    for rho in rho_grid:
        v = augmented_dual_value(program, omega, rho, rho, solver=solver)
        values.append(v)
        if threshold is None and v >= zeta_sip - tol:
            threshold = rho
    return DualityStudy(rho_grid, values, zeta_sip, threshold, np.array(omega), tol)
