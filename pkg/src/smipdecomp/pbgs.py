"""Penalty-based block Gauss-Seidel heuristic for two-stage SMIPs.

Scenario copies ``x_s`` are pulled towards a consensus ``z`` by asymmetric
per-component penalties.  Each outer iteration runs block Gauss-Seidel on
the penalised objective (scenario MILPs for x, a separable closed form for
z), then raises the penalties on the components that still disagree.
"""
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import gs
from ._blocks import SubproblemError, map_scenarios, scenario_block, with_discrepancy_columns
from .mip import MilpProblem, solve_lp, solve_milp
from .mip.problem import BIN, CONT
from .penalty import neg_part

RESIDUAL_MET = "residual_met"
K_MAX = "k_max"
TIME_LIMIT = "time_limit"

KEEP_PREVIOUS = "keep_previous"
COIN_FLIP = "coin_flip"


@dataclass
class PenaltyWeights:
    """Per-scenario, per-component weights; rows are scenarios."""

    rho_lo: np.ndarray
    rho_hi: np.ndarray
    probs: np.ndarray

    @classmethod
    def uniform(cls, program, rho0):
        shape = (program.n_scenarios, program.n_x)
        return cls(np.full(shape, float(rho0)), np.full(shape, float(rho0)), program.probs.copy())

    def mu(self, s):
        return self.rho_lo[s] / self.probs[s], self.rho_hi[s] / self.probs[s]

    def copy(self):
        return PenaltyWeights(self.rho_lo.copy(), self.rho_hi.copy(), self.probs)


@dataclass(frozen=True)
class PbgsParams:
    rho0: float = 1.0
    gamma: Optional[float] = None  # defaults to gamma_factor * rho0
    gamma_factor: float = 1.0
    beta: float = 1.25
    eps: float = 1e-3
    l_max: int = 20
    k_max: int = 50
    tie_break: str = KEEP_PREVIOUS
    seed: int = 0
    multiplier_exponent: str = "k_minus_1"
    threads: int = 1
    time_limit: Optional[float] = None

    @property
    def step(self):
        return self.gamma if self.gamma is not None else self.gamma_factor * self.rho0

    def multiplier(self, k):
        e = k - 1 if self.multiplier_exponent == "k_minus_1" else k
        return self.beta**e - 1.0

    def validate(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.step > 0:
            raise ValueError("gamma must be positive")
        if not self.beta > 1:
            raise ValueError("beta must exceed 1")
        if not self.eps >= 0:
            raise ValueError("eps must be non-negative")
        if self.l_max < 1 or self.k_max < 1:
            raise ValueError("l_max and k_max must be at least 1")
        if self.tie_break not in (KEEP_PREVIOUS, COIN_FLIP):
            raise ValueError(f"unknown tie_break {self.tie_break!r}")
        if self.multiplier_exponent not in ("k_minus_1", "k"):
            raise ValueError(f"unknown multiplier_exponent {self.multiplier_exponent!r}")


@dataclass
class OuterRecord:
    k: int
    multiplier: float
    inner_iterations: int
    gammas: List[float]
    phis: List[float]
    residual: float
    rho_lo: np.ndarray
    rho_hi: np.ndarray
    delta: Optional[np.ndarray] = None


@dataclass
class ConsensusEvaluation:
    feasible: bool
    objective: float
    z: np.ndarray
    y: list = field(default_factory=list)
    infeasible_scenarios: List[int] = field(default_factory=list)
    reason: str = ""


@dataclass
class PbgsReport:
    x: np.ndarray
    y: list
    z: np.ndarray
    history: List[OuterRecord]
    termination: str
    wall_time: float
    evaluation: Optional[ConsensusEvaluation]
    subproblem_solves: int = 0
    bb_nodes: int = 0

    @property
    def outer_iterations(self):
        return len(self.history)

    @property
    def inner_iterations(self):
        return sum(r.inner_iterations for r in self.history)

    @property
    def residual(self):
        return self.history[-1].residual if self.history else math.inf

    @property
    def converged(self):
        return self.termination == RESIDUAL_MET


# --- objective ----------------------------------------------------------------


def penalty_value(x, z, rho_lo, rho_hi):
    """``sum_s rho_lo_s . [x_s - z]^- + rho_hi_s . [z - x_s]^-``."""
    u = np.asarray(x, dtype=float) - np.asarray(z, dtype=float)
    return math.fsum((np.asarray(rho_lo) * neg_part(u)).ravel()) + math.fsum((np.asarray(rho_hi) * neg_part(-u)).ravel())


def expected_cost(program, x, y):
    c, q = program.cost, program.q_matrix
    return math.fsum(p * (float(c @ x[s]) + float(q[s] @ y[s])) for s, p in enumerate(program.probs))


def phi(program, x, y, z, weights, multiplier):
    """Penalised objective: expected cost plus ``multiplier`` times the weighted discrepancy."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    S, n_x = program.n_scenarios, program.n_x
    if x.shape != (S, n_x) or np.asarray(z).shape != (n_x,) or len(y) != S:
        raise ValueError(f"dimension mismatch: expected x of shape {(S, n_x)}, z of length {n_x}, {S} y blocks")
    if multiplier < 0:
        raise ValueError("multiplier must be non-negative")
    base = expected_cost(program, x, y)
    if multiplier == 0:
        return base
    return base + multiplier * penalty_value(x, z, weights.rho_lo, weights.rho_hi)


def build_x_subproblem(program, s, z, weights, multiplier):
    """Scenario ``s`` MILP over ``[x, y, w_lo, w_hi]`` with weights ``multiplier * rho / p_s``."""
    mu_lo, mu_hi = weights.mu(s)
    return with_discrepancy_columns(program, s, program.cost, z, multiplier * mu_lo, multiplier * mu_hi)


# --- z update -------------------------------------------------------------------


def _median_interval(xs, lo_w, hi_w):
    """Minimiser interval ``[a, b]`` of ``sum lo_w max(0, z-x) + hi_w max(0, x-z)``.

    Endpoints are breakpoints (values of ``xs``).  The right slope at a
    breakpoint ``v`` is ``sum_{x<=v} lo_w - sum_{x>v} hi_w``; the first
    breakpoint with a non-negative right slope is the left end, and a zero
    slope there extends the interval to the next breakpoint.
    """
    order = np.argsort(xs, kind="stable")
    v = xs[order]
    lo_w = lo_w[order]
    hi_w = hi_w[order]
    uniq = np.unique(v)
    for t, val in enumerate(uniq):
        below = v <= val
        slope = math.fsum(lo_w[below]) - math.fsum(hi_w[~below])
        if slope >= 0:
            if slope == 0 and t + 1 < len(uniq):
                return val, uniq[t + 1]
            return val, val
    return uniq[-1], uniq[-1]  # pragma: no cover - weights all zero


def update_z(x, rho_lo, rho_hi, kinds, z_prev=None, tie_break=KEEP_PREVIOUS, rng=None):
    """Minimise the weighted discrepancy over ``z`` componentwise.

    Binary components with binary data use the closed form: ``z_i = 1`` iff
    ``sum_s (1 - x_si) rho_lo_si < sum_s x_si rho_hi_si``.  Every other
    component takes the weighted-median interval of the ``x_si`` values.
    Ties (an interval of minimisers) keep ``z_prev`` clipped into the
    interval, or pick an end at random under ``coin_flip``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rho_lo = np.asarray(rho_lo, dtype=float)
    rho_hi = np.asarray(rho_hi, dtype=float)
    n_x = x.shape[1]
    kinds = np.asarray(kinds)
    z = np.empty(n_x)
    for i in range(n_x):
        col = x[:, i]
        if kinds[i] == BIN and np.all((col == 0.0) | (col == 1.0)):
            left = math.fsum((1.0 - col) * rho_lo[:, i])
            right = math.fsum(col * rho_hi[:, i])
            if left < right:
                z[i] = 1.0
                continue
            if left > right:
                z[i] = 0.0
                continue
            a, b = 0.0, 1.0
        else:
            a, b = _median_interval(col, rho_lo[:, i], rho_hi[:, i])
        if a == b:
            z[i] = a
        elif tie_break == COIN_FLIP:
            z[i] = b if rng.integers(2) else a
        elif z_prev is None:
            z[i] = a
        else:
            z[i] = min(max(float(z_prev[i]), a), b)
            if kinds[i] == BIN:
                z[i] = float(round(z[i]))
    return z


def solve_z_lp(x, rho_lo, rho_hi, solver=None):
    """The z step as an explicit LP: ``min sum rho_lo w_lo + rho_hi w_hi`` with
    ``w_lo >= z - x_s``, ``w_hi >= x_s - z``, ``w >= 0``, z free.

    Returns ``(z, objective)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    S, n = x.shape
    # columns: z (n), w_lo (S*n), w_hi (S*n)
    N = n + 2 * S * n
    c = np.concatenate([np.zeros(n), np.asarray(rho_lo, dtype=float).ravel(), np.asarray(rho_hi, dtype=float).ravel()])
    A = np.zeros((2 * S * n, N))
    rhs = np.empty(2 * S * n)
    r = 0
    for s in range(S):
        for i in range(n):
            k = s * n + i
            A[r, n + k] = 1.0  # w_lo - z >= -x
            A[r, i] = -1.0
            rhs[r] = -x[s, i]
            A[r + 1, n + S * n + k] = 1.0  # w_hi + z >= x
            A[r + 1, i] = 1.0
            rhs[r + 1] = x[s, i]
            r += 2
    lb = np.concatenate([np.full(n, -np.inf), np.zeros(2 * S * n)])
    ub = np.full(N, np.inf)
    prob = MilpProblem(c, A, np.ones(2 * S * n, dtype=np.int8), rhs, lb, ub, np.zeros(N, dtype=np.int8))
    sol = (solver or solve_lp)(prob)
    if sol.status != "optimal":
        raise RuntimeError(f"z-step LP ended with status {sol.status}")
    return sol.x[:n], sol.objective


def check_z_optimality(x, z, rho_lo, rho_hi, tol=1e-9):
    """Per-component subgradient test for the z step.

    With ``I+ = {s: x_si > z_i}``, ``I- = {s: x_si < z_i}`` and ``I0`` the
    rest, ``z_i`` is optimal iff ``sum_{I+} rho_hi - sum_{I-} rho_lo`` lies in
    ``[-sum_{I0} rho_hi, sum_{I0} rho_lo]``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.asarray(z, dtype=float)
    rho_lo = np.asarray(rho_lo, dtype=float)
    rho_hi = np.asarray(rho_hi, dtype=float)
    out = np.empty(x.shape[1], dtype=bool)
    for i in range(x.shape[1]):
        d = x[:, i] - z[i]
        plus = d > tol
        minus = d < -tol
        zero = ~(plus | minus)
        lhs = math.fsum(rho_hi[plus, i]) - math.fsum(rho_lo[minus, i])
        slack = tol * max(1.0, math.fsum(rho_hi[:, i]) + math.fsum(rho_lo[:, i]))
        out[i] = -math.fsum(rho_hi[zero, i]) - slack <= lhs <= math.fsum(rho_lo[zero, i]) + slack
    return out


# --- penalty update -------------------------------------------------------------


def update_penalties(weights, x_hat, z_hat, gamma):
    """Raise ``rho_lo`` where ``x < z`` and ``rho_hi`` where ``x > z`` by ``gamma`` times the gap.

    Returns the new weights and the shift ``Delta_i`` this causes in the
    left side of the z-optimality test:
    ``gamma * (sum_{I+} (x - z) - sum_{I-} (z - x))`` with the index sets
    taken at ``z_hat``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    x_hat = np.atleast_2d(np.asarray(x_hat, dtype=float))
    u = x_hat - np.asarray(z_hat, dtype=float)
    new = weights.copy()
    new.rho_lo = weights.rho_lo + gamma * neg_part(u)
    new.rho_hi = weights.rho_hi + gamma * neg_part(-u)
    delta = np.array([gamma * (math.fsum(np.maximum(u[:, i], 0.0)) - math.fsum(np.maximum(-u[:, i], 0.0))) for i in range(u.shape[1])])
    return new, delta


# --- consensus evaluation -------------------------------------------------------


def repair(program, z):
    """Round integer-kind components and clip into the first-stage bounds."""
    lb, ub, kinds = program.x_bounds
    z = np.array(z, dtype=float)
    ints = kinds != CONT
    z[ints] = np.floor(z[ints] + 0.5)
    return np.minimum(np.maximum(z, lb), ub) + 0.0


def evaluate_consensus(program, z, solver=None, threads=1):
    """Cost of implementing first stage ``z`` in every scenario (after rounding repair)."""
    solver = solver or solve_milp
    z = np.asarray(z, dtype=float)
    if z.shape != (program.n_x,):
        raise ValueError(f"z must have length {program.n_x}")
    z = repair(program, z)
    A1, sense1, rhs1 = program.first_stage_matrix
    if A1.shape[0]:
        probe = MilpProblem(np.zeros(program.n_x), A1, sense1, rhs1, z, z, np.zeros(program.n_x, dtype=np.int8))
        if probe.max_violation(z) > 1e-6:
            return ConsensusEvaluation(False, math.inf, z, reason="first-stage rows violated")
    n_x = program.n_x

    def recourse(s):
        A, sense, rhs, lb, ub, kinds = scenario_block(program, s)
        lb = lb.copy()
        ub = ub.copy()
        lb[:n_x] = z
        ub[:n_x] = z
        c = np.concatenate([np.zeros(n_x), program.q_matrix[s]])
        return solver(MilpProblem(c, A, sense, rhs, lb, ub, kinds))

    sols = map_scenarios(recourse, program.n_scenarios, threads)
    bad = [s for s, sol in enumerate(sols) if sol.status != "optimal"]
    if bad:
        return ConsensusEvaluation(False, math.inf, z, infeasible_scenarios=bad, reason=f"recourse infeasible in scenarios {bad}")
    ys = [sol.x[n_x:] for sol in sols]
    obj = float(program.cost @ z) + math.fsum(p * float(program.q_matrix[s] @ ys[s]) for s, p in enumerate(program.probs))
    return ConsensusEvaluation(True, obj, z, ys)


# --- algorithm ------------------------------------------------------------------------


class _XStep:
    """Scenario x-updates for one penalty level; keeps the incumbent on ties."""

    def __init__(self, program, weights, multiplier, solver, threads, k, counters):
        self.program = program
        self.weights = weights
        self.multiplier = multiplier
        self.solver = solver
        self.threads = threads
        self.k = k
        self.counters = counters

    def scenario_value(self, s, x, y, z):
        """Subproblem objective of ``(x, y)`` at consensus ``z``."""
        p = self.program
        val = float(p.cost @ x) + float(p.q_matrix[s] @ y)
        if self.multiplier == 0:
            return val
        mu_lo, mu_hi = self.weights.mu(s)
        u = x - z
        return val + self.multiplier * (float(mu_lo @ neg_part(u)) + float(mu_hi @ neg_part(-u)))

    def solve_one(self, s, z):
        prob = build_x_subproblem(self.program, s, z, self.weights, self.multiplier)
        sol = self.solver(prob)
        if sol.status != "optimal":
            raise SubproblemError("pbgs", s, self.k, sol.status)
        n_x = self.program.n_x
        return sol.x[:n_x], sol.x[n_x : n_x + self.program.n_y], sol.nodes

    def __call__(self, z, prev):
        x_prev, y_prev = prev
        results = map_scenarios(lambda s: self.solve_one(s, z), self.program.n_scenarios, self.threads)
        x = np.array(x_prev, dtype=float)
        y = list(y_prev)
        for s, (xs, ys, nodes) in enumerate(results):
            self.counters["solves"] += 1
            self.counters["nodes"] += nodes
            new = self.scenario_value(s, xs, ys, z)
            old = self.scenario_value(s, x[s], y[s], z)
            if new < old - 1e-9 * max(1.0, abs(old)):
                x[s], y[s] = xs, ys
        return x, y


def initial_consensus(program, x0):
    """Probability-weighted average of the scenario first stages, rounded on integer components."""
    z = np.array([math.fsum(p * x0[s, i] for s, p in enumerate(program.probs)) for i in range(program.n_x)])
    kinds = program.x_bounds[2]
    ints = kinds != CONT
    z[ints] = np.floor(z[ints] + 0.5)
    return z


def run_pbgs(program, params=None, solver=None):
    """Run the penalty-based Gauss-Seidel heuristic and evaluate its consensus."""
    params = params or PbgsParams()
    params.validate()
    solver = solver or solve_milp
    t0 = time.perf_counter()
    deadline = None if params.time_limit is None else t0 + params.time_limit
    rng = np.random.default_rng(params.seed)
    kinds = program.x_bounds[2]
    S, n_x = program.n_scenarios, program.n_x
    counters = {"solves": 0, "nodes": 0}

    weights = PenaltyWeights.uniform(program, params.rho0)
    # penalty-free start
    start = _XStep(program, weights, 0.0, solver, params.threads, 0, counters)
    sols = map_scenarios(lambda s: start.solve_one(s, np.zeros(n_x)), S, params.threads)
    counters["solves"] += S
    counters["nodes"] += sum(r[2] for r in sols)
    x = np.array([r[0] for r in sols])
    y = [r[1] for r in sols]
    z = initial_consensus(program, x)

    history = []
    termination = K_MAX
    stop = (lambda: time.perf_counter() > deadline) if deadline is not None else None
    for k in range(1, params.k_max + 1):
        mult = params.multiplier(k)
        w = weights

        def solve_z(xy, z_prev, w=w, mult=mult):
            if mult == 0:
                return z_prev
            return update_z(xy[0], w.rho_lo, w.rho_hi, kinds, z_prev, params.tie_break, rng)

        block = gs.BlockProblem(
            f=lambda xy, zz, w=w, mult=mult: phi(program, xy[0], xy[1], zz, w, mult),
            solve_x=_XStep(program, w, mult, solver, params.threads, k, counters),
            solve_z=solve_z,
            x0=(x, y),
            z0=z,
        )
        traj = gs.run_block_gs(block, params.eps, params.l_max, stop=stop)
        x, y = traj.x
        z = traj.z
        residual = math.fsum(((x - z) ** 2).ravel())
        obj = traj.objectives
        history.append(
            OuterRecord(k, mult, traj.iterations, [obj[i] - obj[i + 1] for i in range(len(obj) - 1)], list(obj), residual,
                        weights.rho_lo.copy(), weights.rho_hi.copy())
        )
        if residual <= params.eps:
            termination = RESIDUAL_MET
            break
        if k == params.k_max:
            break
        if stop is not None and stop():
            termination = TIME_LIMIT
            break
        weights, delta = update_penalties(weights, x, z, params.step)
        history[-1].delta = delta

    wall = time.perf_counter() - t0
    evaluation = evaluate_consensus(program, z, solver=solver, threads=params.threads)
    return PbgsReport(x, y, z, history, termination, wall, evaluation, counters["solves"], counters["nodes"])
