"""Containers for linear and mixed-integer linear programs."""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

CONT, BIN, INT = 0, 1, 2
KIND_CODES = {"cont": CONT, "bin": BIN, "int": INT}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}

LE, EQ, GE = -1, 0, 1
SENSE_CODES = {"le": LE, "eq": EQ, "ge": GE, "<=": LE, "=": EQ, "==": EQ, ">=": GE}
SENSE_NAMES = {LE: "le", EQ: "eq", GE: "ge"}

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True, eq=False)
class MilpProblem:
    """``min c @ x + obj_offset`` s.t. ``A @ x (sense) rhs``, ``lb <= x <= ub``.

    ``sense`` holds -1/0/+1 for <=, =, >= and ``kinds`` 0/1/2 for
    continuous, binary and general integer columns.  Arrays are treated as
    read-only once the problem is built.
    """

    c: np.ndarray
    A: np.ndarray
    sense: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    kinds: np.ndarray
    obj_offset: float = 0.0
    names: Optional[tuple] = field(default=None)

    @property
    def n(self):
        return self.c.shape[0]

    @property
    def m(self):
        return self.rhs.shape[0]

    @property
    def integer_mask(self):
        return self.kinds != CONT

    @classmethod
    def from_rows(cls, c, rows, lb, ub, kinds=None, obj_offset=0.0, names=None):
        """Build from sparse rows ``(coeffs, sense, rhs)``.

        ``coeffs`` is an iterable of ``(column, value)`` pairs (or a dict);
        repeated columns are summed.  ``sense`` accepts 'le'/'eq'/'ge'.
        """
        c = np.asarray(c, dtype=float)
        n = c.shape[0]
        A = np.zeros((len(rows), n))
        sense = np.zeros(len(rows), dtype=np.int8)
        rhs = np.zeros(len(rows))
        for i, (coeffs, sns, b) in enumerate(rows):
            items = coeffs.items() if isinstance(coeffs, dict) else coeffs
            for j, v in items:
                A[i, j] += v
            sense[i] = SENSE_CODES[sns] if isinstance(sns, str) else sns
            rhs[i] = b
        if kinds is None:
            kinds = np.zeros(n, dtype=np.int8)
        else:
            kinds = np.array([KIND_CODES[k] if isinstance(k, str) else k for k in kinds], dtype=np.int8)
        return cls(
            c=c,
            A=A,
            sense=sense,
            rhs=rhs,
            lb=np.asarray(lb, dtype=float).copy(),
            ub=np.asarray(ub, dtype=float).copy(),
            kinds=kinds,
            obj_offset=float(obj_offset),
            names=None if names is None else tuple(names),
        )

    def validate(self):
        """Raise ``ValueError`` on malformed data."""
        n, m = self.n, self.m
        if self.A.shape != (m, n):
            raise ValueError(f"A has shape {self.A.shape}, expected {(m, n)}")
        for name in ("lb", "ub", "kinds"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have length {n}")
        if self.sense.shape != (m,):
            raise ValueError(f"sense must have length {m}")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.rhs))):
            raise ValueError("non-finite objective or constraint coefficient")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise ValueError("NaN bound")
        bad = np.flatnonzero(self.lb > self.ub)
        if bad.size:
            raise ValueError(f"lb > ub for column {bad[0]}")
        binary = self.kinds == BIN
        if np.any(binary & ((self.lb < 0) | (self.ub > 1))):
            raise ValueError("binary column with bounds outside [0, 1]")
        return self

    def relaxed(self):
        """Copy with every column continuous (binary bounds kept)."""
        return replace(self, kinds=np.zeros(self.n, dtype=np.int8))

    def with_bounds(self, lb, ub):
        return replace(self, lb=np.asarray(lb, dtype=float), ub=np.asarray(ub, dtype=float))

    def row_activity(self, x):
        return self.A @ np.asarray(x, dtype=float)

    def max_violation(self, x):
        """Largest violation of any row or bound at ``x``."""
        x = np.asarray(x, dtype=float)
        act = self.A @ x
        viol = np.zeros(self.m)
        viol = np.where(self.sense == LE, act - self.rhs, viol)
        viol = np.where(self.sense == GE, self.rhs - act, viol)
        viol = np.where(self.sense == EQ, np.abs(act - self.rhs), viol)
        worst = max(viol.max(initial=0.0), (self.lb - x).max(initial=0.0), (x - self.ub).max(initial=0.0))
        return float(max(worst, 0.0))

    def objective(self, x):
        return float(self.c @ np.asarray(x, dtype=float) + self.obj_offset)


@dataclass
class MilpSolution:
    status: str
    x: Optional[np.ndarray]
    objective: float
    bound: float
    duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    nodes: int = 0
    iterations: int = 0

    @property
    def optimal(self):
        return self.status == OPTIMAL
