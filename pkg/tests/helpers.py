"""Test-only oracles and tiny random instances.

scipy's HiGHS interface is used here as an independent reference solver;
the library itself never calls it.
"""
import itertools
import math

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from smipdecomp.mip.problem import BIN, EQ, GE, LE
from smipdecomp.model import Row, Scenario, StochasticProgram, VarSpec

PROB_CHOICES = {1: [(1.0,)], 2: [(0.5, 0.5), (0.25, 0.75)], 3: [(0.25, 0.25, 0.5), (0.5, 0.25, 0.25)]}


def highs(problem, relax=False):
    """``(status, objective, x)`` of a ``MilpProblem`` from scipy HiGHS."""
    rows_lo = np.where(problem.sense == LE, -np.inf, problem.rhs)
    rows_hi = np.where(problem.sense == GE, np.inf, problem.rhs)
    cons = [LinearConstraint(problem.A, rows_lo, rows_hi)] if problem.m else []
    integrality = np.zeros(problem.n) if relax else (problem.kinds != 0).astype(int)
    # presolve off: scipy 1.15's HiGHS presolve returns a suboptimal point on
    # some tiny MILPs with fixed integer columns
    res = milp(problem.c, constraints=cons, integrality=integrality, bounds=Bounds(problem.lb, problem.ub),
               options={"mip_rel_gap": 0.0, "presolve": False})
    if res.status == 0:
        return "optimal", float(res.fun) + problem.obj_offset, res.x
    if res.status == 2:
        return "infeasible", math.inf, None
    if res.status == 3:
        return "unbounded", -math.inf, None
    return "other", math.nan, None


def tiny_program(rng, n_x=None, n_y=None, S=None, identical=False):
    """Random integer-data SMIP: binary first stage (n_x <= 4), n_y <= 3, |S| <= 3.

    Scenario rows are ``T x + W y >= h`` with ``W >= 1`` and bounded ``y``;
    ``h`` is capped so every binary ``x`` keeps a feasible recourse.
    """
    n_x = n_x or int(rng.integers(1, 5))
    n_y = n_y or int(rng.integers(1, 4))
    S = S or int(rng.integers(1, 4))
    probs = PROB_CHOICES[S][int(rng.integers(len(PROB_CHOICES[S])))]
    c = tuple(float(v) for v in rng.integers(-5, 6, n_x))
    xvars = tuple(VarSpec(0.0, 1.0, "bin") for _ in range(n_x))
    kinds = [("bin", 1.0), ("int", 3.0), ("cont", 3.0)]
    yk = [kinds[int(rng.integers(3))] for _ in range(n_y)]
    yvars = tuple(VarSpec(0.0, ub, k) for k, ub in yk)
    xs = list(itertools.product((0.0, 1.0), repeat=n_x))
    base = None
    scenarios = []
    for s in range(S):
        if identical and base is not None:
            scenarios.append(Scenario(probs[s], base.q, base.second_stage_vars, base.rows))
            continue
        q = tuple(float(v) for v in rng.integers(0, 6, n_y))
        rows = []
        for _ in range(int(rng.integers(1, 3))):
            T = rng.integers(-2, 3, n_x).astype(float)
            W = rng.integers(1, 4, n_y).astype(float)
            top = float(W @ np.array([ub for _, ub in yk]))
            h = float(rng.integers(0, 6))
            h = min(h, min(top + T @ np.array(x) for x in xs))
            coeffs = tuple((i, float(T[i])) for i in range(n_x) if T[i] != 0) + tuple(
                (n_x + j, float(W[j])) for j in range(n_y)
            )
            rows.append(Row(coeffs, "ge", h))
        sc = Scenario(probs[s], q, yvars, tuple(rows))
        base = base or sc
        scenarios.append(sc)
    return StochasticProgram("tiny", n_x, n_y, c, xvars, (), tuple(scenarios))


def recourse_problem(program, s, x):
    """Scenario ``s`` recourse MILP with ``x`` fixed, as a ``MilpProblem``."""
    from smipdecomp._blocks import scenario_block
    from smipdecomp.mip import MilpProblem

    A, sense, rhs, lb, ub, kinds = scenario_block(program, s)
    lb, ub = lb.copy(), ub.copy()
    lb[: program.n_x] = x
    ub[: program.n_x] = x
    c = np.concatenate([np.zeros(program.n_x), program.q_matrix[s]])
    return MilpProblem(c, A, sense, rhs, lb, ub, kinds)


def enumerate_exact(program):
    """Brute force over binary first stages, HiGHS for each recourse MILP.

    Returns ``(value, x)``.
    """
    assert np.all(program.x_bounds[2] == BIN)
    A1, sense1, rhs1 = program.first_stage_matrix
    best, arg = math.inf, None
    for bits in itertools.product((0.0, 1.0), repeat=program.n_x):
        x = np.array(bits)
        act = A1 @ x
        if np.any((sense1 == LE) & (act > rhs1 + 1e-9)) or np.any((sense1 == GE) & (act < rhs1 - 1e-9)) or np.any(
            (sense1 == EQ) & (np.abs(act - rhs1) > 1e-9)
        ):
            continue
        total = float(program.cost @ x)
        for s, p in enumerate(program.probs):
            st, val, _ = highs(recourse_problem(program, s, x))
            if st != "optimal":
                total = math.inf
                break
            total += p * val
        if total < best - 1e-12:
            best, arg = total, x
    return best, arg


def miqp_enumeration(program, s, z, omega, rho):
    """Exact quadratic subproblem by brute force over binary x."""
    best = math.inf
    for bits in itertools.product((0.0, 1.0), repeat=program.n_x):
        x = np.array(bits)
        status, val, _ = highs(recourse_problem(program, s, x))
        if status != "optimal":
            continue
        total = float((program.cost + omega) @ x) + val + 0.5 * rho * float((x - z) @ (x - z))
        best = min(best, total)
    return best
