"""Two-block Gauss-Seidel: alternate exact minimisation over x and z.

A :class:`BlockProblem` carries the objective and one exact minimiser per
block.  Minimisers receive the other block and their own previous value, so
tie-break rules such as "keep the incumbent" can be expressed.
"""
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, List

import numpy as np

EPS_CRITERION = "eps_criterion"
K_MAX = "k_max"
STOPPED = "stopped"


@dataclass
class BlockProblem:
    f: Callable[[Any, Any], float]
    solve_x: Callable[[Any, Any], Any]  # (z, x_prev) -> argmin_x f(x, z)
    solve_z: Callable[[Any, Any], Any]  # (x, z_prev) -> argmin_z f(x, z)
    x0: Any
    z0: Any


@dataclass
class GsTrajectory:
    xs: List[Any] = field(default_factory=list)
    zs: List[Any] = field(default_factory=list)
    objectives: List[float] = field(default_factory=list)
    termination: str = ""

    @property
    def x(self):
        return self.xs[-1]

    @property
    def z(self):
        return self.zs[-1]

    @property
    def objective(self):
        return self.objectives[-1]

    @property
    def iterations(self):
        return len(self.xs) - 1

    def is_monotone(self, tol=0.0):
        obj = np.asarray(self.objectives)
        return bool(np.all(np.diff(obj) <= tol))


def run_block_gs(p, eps=0.0, k_max=100, stop=None):
    """Alternate the x and z minimisers from ``(p.x0, p.z0)``.

    Stops after iteration ``k`` when ``f(x^{k-1}, z^{k-1}) - f(x^k, z^k) <= eps``
    or when ``k == k_max``.  Iterate 0 is the starting point.  ``stop`` is an
    optional callable polled after each iteration (cooperative time limits).
    """
    x, z = p.x0, p.z0
    traj = GsTrajectory([x], [z], [p.f(x, z)])
    for k in range(1, k_max + 1):
        x = p.solve_x(z, x)
        z = p.solve_z(x, z)
        val = p.f(x, z)
        traj.xs.append(x)
        traj.zs.append(z)
        traj.objectives.append(val)
        if traj.objectives[-2] - val <= eps:
            traj.termination = EPS_CRITERION
            return traj
        if stop is not None and k < k_max and stop():
            traj.termination = STOPPED
            return traj
    traj.termination = K_MAX
    return traj


def certify_partial_minimum(p, x, z, eps=0.0):
    """True iff neither block minimiser improves ``f`` at ``(x, z)`` by more than ``eps``."""
    val = p.f(x, z)
    if val - p.f(p.solve_x(z, x), z) > eps:
        return False
    return val - p.f(x, p.solve_z(x, z)) <= eps


# --- fixtures -------------------------------------------------------------------


def _argmin_first(candidates, fn):
    """First candidate attaining the minimum (exact comparison)."""
    best, best_val = None, np.inf
    for c in candidates:
        v = fn(c)
        if v < best_val:
            best, best_val = c, v
    return best


def example1():
    """``7x^2 + 10xz + 7z^2`` over ``{-2,..,2}^2`` from ``(2, -2)``."""
    grid = range(-2, 3)

    def f(x, z):
        return 7 * x * x + 10 * x * z + 7 * z * z

    return BlockProblem(
        f=f,
        solve_x=lambda z, _x: _argmin_first(grid, lambda x: f(x, z)),
        solve_z=lambda x, _z: _argmin_first(grid, lambda z: f(x, z)),
        x0=2,
        z0=-2,
    )


def example2(rho, z0=0.0, x0=None):
    """``-2x - z + rho|x - z|`` with ``x in [-2, 3]``, ``z in [0, 5]``.

    Each block is a convex piecewise-linear function of one variable with a
    single kink at the other block's value, so its minimum is attained at
    the clipped kink or an interval end.  Candidates are tried in that order
    (kink first), which reproduces the stated limit points when the
    minimiser is an interval.
    """
    xl, xu, zl, zu = -2.0, 3.0, 0.0, 5.0

    def f(x, z):
        return -2.0 * x - z + rho * abs(x - z)

    def solve_x(z, _x):
        return _argmin_first((min(max(z, xl), xu), xl, xu), lambda x: f(x, z))

    def solve_z(x, _z):
        return _argmin_first((min(max(x, zl), zu), zl, zu), lambda z: f(x, z))

    if x0 is None:
        x0 = min(max(z0, xl), xu)
    return BlockProblem(f, solve_x, solve_z, x0=float(x0), z0=float(z0))


EX3_COST = np.array([[2.0, -1.0, -2.0], [-2.0, -1.0, 2.0]])
# rows of X for one scenario: at most one component set
_EX3_ROWS = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]


def example3(rho, z_rule="lexicographic", z0=(0, 0, 0), x0=None):
    """Two scenarios, three binaries, weighted ``|x_ij - z_j|`` penalties.

    ``rho`` is a scalar or a 2x3 matrix.  Both blocks are solved by
    enumeration.  The x block keeps the first minimiser in the order
    none, e1, e2, e3; ``z_rule`` picks the lexicographically smallest
    (``lexicographic``) or largest (``reverse-lexicographic``) minimiser
    over ``{0,1}^3``.
    """
    R = np.broadcast_to(np.asarray(rho, dtype=float), (2, 3)).copy()
    if z_rule not in ("lexicographic", "reverse-lexicographic"):
        raise ValueError(f"unknown z rule {z_rule!r}")
    zs = list(itertools.product((0, 1), repeat=3))
    if z_rule == "reverse-lexicographic":
        zs.reverse()

    def f(x, z):
        X = np.asarray(x, dtype=float)
        Z = np.asarray(z, dtype=float)
        return float(np.sum(EX3_COST * X) + np.sum(R * np.abs(X - Z)))

    def solve_x(z, _x):
        Z = np.asarray(z, dtype=float)
        rows = []
        for i in range(2):
            rows.append(_argmin_first(_EX3_ROWS, lambda r: EX3_COST[i] @ r + R[i] @ np.abs(np.asarray(r) - Z)))
        return tuple(rows)

    def solve_z(x, _z):
        return _argmin_first(zs, lambda z: f(x, z))

    if x0 is None:
        x0 = ((0, 0, 0), (0, 0, 0))
    return BlockProblem(f, solve_x, solve_z, x0=tuple(map(tuple, x0)), z0=tuple(z0))


def builtin_example(name, **kwargs):
    """``ex1``, ``ex2`` (``rho``, ``z0``) or ``ex3`` (``rho``, ``z_rule``, ``z0``)."""
    table = {"ex1": example1, "ex2": example2, "ex3": example3}
    if name not in table:
        raise ValueError(f"unknown example {name!r}; choose from {sorted(table)}")
    return table[name](**kwargs)


def run_schedule(make_problem, schedule, eps=0.0, k_max=100):
    """Run GS to stability under each penalty in ``schedule`` in turn.

    ``make_problem(rho, x0, z0)`` builds the block problem; each stage starts
    from the previous stage's stable point.  Returns the list of trajectories.
    """
    out = []
    x0 = z0 = None
    for rho in schedule:
        p = make_problem(rho, x0, z0)
        traj = run_block_gs(p, eps, k_max)
        out.append(traj)
        x0, z0 = traj.x, traj.z
    return out
