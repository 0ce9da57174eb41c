"""LP-based branch-and-bound.

Best-first node selection (ties: deeper node, then creation order), most
fractional branching with lowest-index tie-break, children warm-started from
the parent basis with the dual simplex.
"""
import heapq
import math

import numpy as np

from .lp import LpWorkspace, _lp_solution
from .problem import (
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    MilpSolution,
)


def _most_fractional(x, int_idx, int_tol):
    best = -1
    best_score = int_tol
    for j in int_idx:
        f = x[j] - math.floor(x[j])
        score = min(f, 1.0 - f)
        if score > best_score + 1e-12:
            best, best_score = j, score
    return best


def solve_milp(problem, *, feas_tol=1e-6, int_tol=1e-6, opt_gap=0.0, node_limit=100_000, backend=None, lp_max_iter=50_000):
    """Solve a MILP to optimality (or until ``node_limit`` LPs were solved).

    ``opt_gap`` is relative; nodes are pruned when their bound is within
    ``max(1e-9, opt_gap * |incumbent|)`` of the incumbent.  The returned
    ``nodes`` counts LP relaxations solved, which is reproducible for fixed
    input.
    """
    int_idx = np.flatnonzero(problem.integer_mask)
    if int_idx.size and (np.any(~np.isfinite(problem.lb[int_idx])) or np.any(~np.isfinite(problem.ub[int_idx]))):
        raise ValueError("integer columns must have finite bounds")

    ws = LpWorkspace(problem, backend=backend, max_iter=lp_max_iter)
    lb0 = problem.lb.copy()
    ub0 = problem.ub.copy()
    # integer bounds are integral in every node
    lb0[int_idx] = np.ceil(lb0[int_idx] - int_tol)
    ub0[int_idx] = np.floor(ub0[int_idx] + int_tol)
    if np.any(lb0 > ub0):
        return MilpSolution(INFEASIBLE, None, np.inf, np.inf)
    ws.set_bounds(lb0, ub0)
    status = ws.solve()
    nodes = 1
    iters = ws.iterations
    if status != OPTIMAL:
        sol = _lp_solution(ws, status)
        sol.nodes = nodes
        if status == ITERATION_LIMIT:
            sol.bound = -np.inf
        return sol
    if int_idx.size == 0:
        sol = _lp_solution(ws, status)
        sol.nodes = nodes
        return sol

    incumbent = None
    inc_obj = np.inf
    counter = 0
    # heap entries: (bound, -depth, id, lb, ub, warm basis, x)
    heap = [(problem.objective(ws.primal_values()), 0, counter, lb0, ub0, ws.snapshot(), ws.primal_values())]

    def gap_tol():
        return max(1e-9, opt_gap * abs(inc_obj)) if np.isfinite(inc_obj) else 0.0

    limit_hit = False
    while heap:
        bound, negdepth, _, lb, ub, warm, x = heapq.heappop(heap)
        if bound >= inc_obj - gap_tol():
            continue
        j = _most_fractional(x, int_idx, int_tol)
        if j < 0:
            xi = x.copy()
            xi[int_idx] = np.round(xi[int_idx])
            if problem.max_violation(xi) <= feas_tol:
                obj = problem.objective(xi)
                if obj < inc_obj:
                    incumbent, inc_obj = xi, obj
                continue
            # rounding broke a row; keep the LP point if it is itself feasible
            if problem.max_violation(x) <= feas_tol and bound < inc_obj:
                incumbent, inc_obj = x.copy(), problem.objective(x)
            continue
        if nodes >= node_limit:
            heapq.heappush(heap, (bound, negdepth, _, lb, ub, warm, x))
            limit_hit = True
            break
        v = x[j]
        for side in (0, 1):
            clb, cub = lb.copy(), ub.copy()
            if side == 0:
                cub[j] = math.floor(v)
            else:
                clb[j] = math.ceil(v)
            ws.set_bounds(clb, cub)
            st = ws.solve(warm=warm)
            nodes += 1
            iters += ws.iterations
            if st == INFEASIBLE:
                continue
            if st == UNBOUNDED:
                return MilpSolution(UNBOUNDED, None, -np.inf, -np.inf, nodes=nodes, iterations=iters)
            if st != OPTIMAL:
                limit_hit = True
                continue
            cx = ws.primal_values()
            cbound = problem.objective(cx)
            if cbound >= inc_obj - gap_tol():
                continue
            counter += 1
            heapq.heappush(heap, (cbound, negdepth - 1, counter, clb, cub, ws.snapshot(), cx))

    open_bound = min((h[0] for h in heap), default=np.inf)
    if incumbent is None:
        if limit_hit:
            return MilpSolution(ITERATION_LIMIT, None, np.nan, min(open_bound, np.inf), nodes=nodes, iterations=iters)
        return MilpSolution(INFEASIBLE, None, np.inf, np.inf, nodes=nodes, iterations=iters)
    best_bound = min(open_bound, inc_obj)
    status = ITERATION_LIMIT if (limit_hit and best_bound < inc_obj - gap_tol()) else OPTIMAL
    return MilpSolution(status, incumbent, inc_obj, best_bound, nodes=nodes, iterations=iters)
