"""Dense building blocks shared by the scenario, extensive and split forms."""
import numpy as np

from .mip.problem import MilpProblem


def scenario_block(program, s):
    """Rows and bounds of scenario ``s`` over columns ``[x, y]``.

    First-stage rows are included, so the block describes
    ``x in X, y in Y_s(x)``.  Returns ``(A, sense, rhs, lb, ub, kinds)``.
    """
    n_x, n_y = program.n_x, program.n_y
    A1, sense1, rhs1 = program.first_stage_matrix
    T, W, sense2, rhs2 = program.scenario_matrix(s)
    A = np.zeros((A1.shape[0] + T.shape[0], n_x + n_y))
    A[: A1.shape[0], :n_x] = A1
    A[A1.shape[0] :, :n_x] = T
    A[A1.shape[0] :, n_x:] = W
    xlb, xub, xk = program.x_bounds
    ylb, yub, yk = program.y_bounds(s)
    return (
        A,
        np.concatenate([sense1, sense2]),
        np.concatenate([rhs1, rhs2]),
        np.concatenate([xlb, ylb]),
        np.concatenate([xub, yub]),
        np.concatenate([xk, yk]),
    )


def with_discrepancy_columns(program, s, x_cost, z, lo_cost, hi_cost):
    """Scenario problem with ``w_lo >= z - x`` and ``w_hi >= x - z`` columns.

    Objective: ``x_cost @ x + q_s @ y + lo_cost @ w_lo + hi_cost @ w_hi``.
    Column order is ``[x, y, w_lo, w_hi]``; the w columns are dropped when
    both cost vectors are zero.
    """
    A, sense, rhs, lb, ub, kinds = scenario_block(program, s)
    n_x = program.n_x
    c = np.concatenate([np.asarray(x_cost, dtype=float), program.q_matrix[s]])
    lo_cost = np.asarray(lo_cost, dtype=float)
    hi_cost = np.asarray(hi_cost, dtype=float)
    if not (lo_cost.any() or hi_cost.any()):
        return MilpProblem(c, A, sense, rhs, lb, ub, kinds)
    z = np.asarray(z, dtype=float)
    m0, n0 = A.shape
    A2 = np.zeros((m0 + 2 * n_x, n0 + 2 * n_x))
    A2[:m0, :n0] = A
    eye = np.eye(n_x)
    # w_lo + x >= z
    A2[m0 : m0 + n_x, :n_x] = eye
    A2[m0 : m0 + n_x, n0 : n0 + n_x] = eye
    # w_hi - x >= -z
    A2[m0 + n_x :, :n_x] = -eye
    A2[m0 + n_x :, n0 + n_x :] = eye
    ge = np.ones(2 * n_x, dtype=np.int8)
    return MilpProblem(
        c=np.concatenate([c, lo_cost, hi_cost]),
        A=A2,
        sense=np.concatenate([sense, ge]),
        rhs=np.concatenate([rhs, z, -z]),
        lb=np.concatenate([lb, np.zeros(2 * n_x)]),
        ub=np.concatenate([ub, np.full(2 * n_x, np.inf)]),
        kinds=np.concatenate([kinds, np.zeros(2 * n_x, dtype=np.int8)]),
    )


class SubproblemError(RuntimeError):
    """A scenario subproblem did not solve to optimality."""

    def __init__(self, method, scenario, iteration, status):
        super().__init__(f"{method}: scenario {scenario} subproblem at iteration {iteration} ended with status {status}")
        self.scenario = scenario
        self.iteration = iteration
        self.status = status


def map_scenarios(fn, n, threads=1):
    """``[fn(0), ..., fn(n-1)]``, optionally on a thread pool; order is preserved."""
    if threads is None or threads <= 1 or n <= 1:
        return [fn(s) for s in range(n)]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))
