"""Bounded-variable primal/dual simplex on a dense tableau.

Every row gets a slack column (``A x + s = b``) whose bounds encode the
row sense, plus an artificial column used only by phase 1.  The tableau is
rebuilt from the basis every ``refactor_every`` pivots to stop round-off
from accumulating; the same rebuild serves warm starts in branch-and-bound.
"""
import numpy as np

from . import _kernels as K
from .problem import (
    GE,
    INFEASIBLE,
    ITERATION_LIMIT,
    LE,
    OPTIMAL,
    UNBOUNDED,
    MilpSolution,
)

TOL_D = 1e-9
TOL_P = 1e-9
TOL_PIV = 1e-7
BLAND_AFTER = 50
# an "optimal" verdict reached after more pivots than this since the last
# rebuild is re-checked on a freshly factored tableau
RECHECK_AFTER = 20


class LpWorkspace:
    """Mutable simplex state for one problem.

    Not shareable between threads; create one workspace per concurrent
    solve.  Structural bounds may be changed between solves with
    :meth:`set_bounds`, and :meth:`solve` accepts a basis snapshot from an
    earlier solve of the same problem as a warm start.
    """

    def __init__(self, problem, backend=None, max_iter=50_000, refactor_every=None):
        self.problem = problem
        m, n = problem.m, problem.n
        self.m, self.n = m, n
        self.N = n + 2 * m
        self.A_full = np.zeros((m, self.N))
        self.A_full[:, :n] = problem.A
        self.A_full[:, n : n + m] = np.eye(m)
        self.b = problem.rhs.astype(float).copy()
        self.cost = np.zeros(self.N)
        self.cost[:n] = problem.c
        self.lb = np.zeros(self.N)
        self.ub = np.zeros(self.N)
        self.lb[:n] = problem.lb
        self.ub[:n] = problem.ub
        sl = n + np.arange(m)
        self.lb[sl] = np.where(problem.sense == GE, -np.inf, 0.0)
        self.ub[sl] = np.where(problem.sense == LE, np.inf, 0.0)
        self.max_iter = max_iter
        self.refactor_every = refactor_every or max(50, min(500, 2 * m))
        self._primal, self._dual = K.kernels(backend)
        self.iterations = 0
        self.basis = None
        self.state = None
        self.x = None
        self.T = None
        self.d = None
        self._cache_key = None
        self._cache = None

    # -- bounds ------------------------------------------------------------

    def set_bounds(self, lb, ub):
        self.lb[: self.n] = lb
        self.ub[: self.n] = ub

    # -- tableau maintenance -------------------------------------------------

    def _nonbasic_values(self):
        st = self.state
        x = self.x
        at_lb = (st == K.AT_LB) | (st == K.FIXED)
        x[at_lb] = self.lb[at_lb]
        at_ub = st == K.AT_UB
        x[at_ub] = self.ub[at_ub]
        x[st == K.FREE] = 0.0

    def _refactor(self):
        self._nonbasic_values()
        if self.m == 0:
            self.T = np.zeros((0, self.N))
            return
        B = self.A_full[:, self.basis]
        nonbasic = self.state != K.BASIC
        rhs = self.b - self.A_full[:, nonbasic] @ self.x[nonbasic]
        # nonbasic artificials are fixed at zero and never priced
        art = np.arange(self.N) >= self.n + self.m
        cols = np.flatnonzero(~(art & nonbasic))
        sol = np.linalg.solve(B, np.column_stack([self.A_full[:, cols], rhs]))
        T = np.zeros((self.m, self.N))
        T[:, cols] = sol[:, :-1]
        T[np.abs(T) < 1e-13] = 0.0
        T[:, self.basis] = np.eye(self.m)
        self.T = T
        self.x[self.basis] = sol[:, -1]

    def _price(self, cost):
        self.d = cost - cost[self.basis] @ self.T
        self.d[self.basis] = 0.0

    def _run(self, kind, cost):
        """Run the primal or dual kernel to completion with periodic refactors."""
        self._price(cost)
        since_refactor = 0
        bland_after = BLAND_AFTER
        while True:
            budget = self.max_iter - self.iterations
            if budget <= 0:
                return K.ITER_CAP
            chunk = min(self.refactor_every, budget)
            if kind == "primal":
                before = float(cost @ self.x)
                status, it = self._primal(
                    self.T, self.d, self.x, self.basis, self.state, self.lb, self.ub,
                    chunk, TOL_D, TOL_PIV, bland_after,
                )
                if status == K.ITER_CAP and float(cost @ self.x) >= before - TOL_D * max(1.0, abs(before)):
                    # a whole chunk without progress: stay on Bland's rule
                    # from the first degenerate pivot onwards
                    bland_after = 0
            else:
                status, it = self._dual(
                    self.T, self.d, self.x, self.basis, self.state, self.lb, self.ub,
                    chunk, TOL_P, TOL_PIV,
                )
            self.iterations += it
            since_refactor += it
            if status == K.ITER_CAP or (status == K.OPTIMAL and since_refactor > RECHECK_AFTER):
                # rebuild from the basis; an optimal answer is re-checked on
                # the fresh tableau before it is accepted
                self._refactor()
                self._price(cost)
                since_refactor = 0
                continue
            return status

    def _cold_start(self):
        n, m = self.n, self.m
        self._cache_key = self._cache = None  # artificial column signs change below
        lb, ub = self.lb, self.ub
        art = n + m + np.arange(m)
        lb[art] = 0.0
        ub[art] = 0.0
        self.A_full[:, art] = np.eye(m)
        x = np.zeros(self.N)
        state = np.empty(self.N, dtype=np.int8)
        for j in range(n + m):
            if lb[j] == ub[j]:
                state[j], x[j] = K.FIXED, lb[j]
            elif lb[j] > -np.inf:
                state[j], x[j] = K.AT_LB, lb[j]
            elif ub[j] < np.inf:
                state[j], x[j] = K.AT_UB, ub[j]
            else:
                state[j], x[j] = K.FREE, 0.0
        state[art] = K.FIXED
        resid = self.b - self.problem.A @ x[:n]
        basis = np.empty(m, dtype=np.int64)
        sign = np.ones(m)
        for i in range(m):
            s = n + i
            if lb[s] - TOL_P <= resid[i] <= ub[s] + TOL_P:
                basis[i] = s
                state[s] = K.BASIC
                x[s] = resid[i]
            else:
                a = art[i]
                r = resid[i] - x[s]
                sign[i] = 1.0 if r > 0 else -1.0
                self.A_full[i, a] = sign[i]
                ub[a] = np.inf
                basis[i] = a
                state[a] = K.BASIC
                x[a] = abs(r)
        self.x, self.state, self.basis = x, state, basis
        self.T = np.ascontiguousarray(self.A_full * sign[:, None])

    # -- solving -----------------------------------------------------------

    def solve(self, warm=None):
        """Solve the current LP; return a status string."""
        self.iterations = 0
        if warm is not None:
            status = self._solve_warm(warm)
            if status is not None:
                return status
        return self._solve_cold()

    def _solve_cold(self):
        self.iterations = 0
        self._cold_start()
        art = self.n + self.m + np.arange(self.m)
        if np.any(self.ub[art] > 0):
            phase1 = np.zeros(self.N)
            phase1[art] = 1.0
            status = self._run("primal", phase1)
            if status == K.ITER_CAP:
                return ITERATION_LIMIT
            infeas = float(self.x[art].sum())
            if infeas > 1e-7 * max(1.0, float(np.abs(self.b).max(initial=0.0))):
                return INFEASIBLE
            self.ub[art] = 0.0
            nb = self.state[art] != K.BASIC
            self.state[art[nb]] = K.FIXED
            self.x[art] = np.where(self.state[art] == K.BASIC, self.x[art], 0.0)
        return self._phase2()

    def _phase2(self):
        status = self._run("primal", self.cost)
        if status == K.ITER_CAP:
            return ITERATION_LIMIT
        if status == K.UNBOUNDED:
            return UNBOUNDED
        return OPTIMAL

    def _solve_warm(self, warm):
        """Dual simplex from a basis snapshot.

        The factored tableau of the most recent snapshot is cached, so
        sibling branch-and-bound nodes (same basis, different bounds) pay
        for one factorisation between them.
        """
        basis, state = warm
        cached = self._cache_key is warm
        if cached:
            basis, state, T, x = self._cache
            self.T = T.copy()
            self.x = x.copy()
        else:
            self.x = np.zeros(self.N)
        self.basis = basis.copy()
        self.state = state.copy()
        st = self.state
        for j in np.flatnonzero(st != K.BASIC):
            if self.lb[j] == self.ub[j]:
                st[j] = K.FIXED
            elif st[j] == K.FIXED or (st[j] == K.AT_LB and self.lb[j] == -np.inf) or (
                st[j] == K.AT_UB and self.ub[j] == np.inf
            ):
                if self.lb[j] > -np.inf:
                    st[j] = K.AT_LB
                elif self.ub[j] < np.inf:
                    st[j] = K.AT_UB
                else:
                    st[j] = K.FREE
        if cached:
            old = self.x.copy()
            self._nonbasic_values()
            moved = np.flatnonzero(self.x != old)
            if moved.size:
                self.x[self.basis] -= self.T[:, moved] @ (self.x[moved] - old[moved])
        else:
            try:
                self._refactor()
            except np.linalg.LinAlgError:
                return None
            self._cache_key = warm
            self._cache = (self.basis.copy(), self.state.copy(), self.T.copy(), self.x.copy())
        status = self._run("dual", self.cost)
        if status == K.INFEASIBLE:
            return INFEASIBLE
        if status == K.ITER_CAP:
            return None
        return self._phase2()

    def snapshot(self):
        return self.basis.copy(), self.state.copy()

    def primal_values(self):
        x = self.x[: self.n].copy()
        return np.minimum(np.maximum(x, self.lb[: self.n]), self.ub[: self.n]) + 0.0

    def duals(self):
        """Row multipliers ``lam`` with ``c + A.T @ lam`` equal to the reduced costs.

        With this sign ``lam >= 0`` on binding <= rows of a minimisation.
        """
        y = self.cost[self.basis] @ self.T[:, self.n : self.n + self.m]
        return -y

    def reduced_costs(self):
        return self.d[: self.n].copy()


def solve_lp(problem, *, backend=None, max_iter=50_000):
    """Solve the LP relaxation of ``problem`` (integrality ignored)."""
    ws = LpWorkspace(problem, backend=backend, max_iter=max_iter)
    status = ws.solve()
    return _lp_solution(ws, status)


def _lp_solution(ws, status):
    problem = ws.problem
    if status == OPTIMAL:
        x = ws.primal_values()
        obj = problem.objective(x)
        return MilpSolution(
            status=OPTIMAL,
            x=x,
            objective=obj,
            bound=obj,
            duals=ws.duals(),
            reduced_costs=ws.reduced_costs(),
            iterations=ws.iterations,
        )
    if status == UNBOUNDED:
        return MilpSolution(UNBOUNDED, None, -np.inf, -np.inf, iterations=ws.iterations)
    if status == INFEASIBLE:
        return MilpSolution(INFEASIBLE, None, np.inf, np.inf, iterations=ws.iterations)
    return MilpSolution(ITERATION_LIMIT, None, np.nan, -np.inf, iterations=ws.iterations)
