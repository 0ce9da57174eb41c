"""Two-stage stochastic MIP instances: data model, validation, generators, I/O.

Row coefficients are sparse ``(index, value)`` pairs.  In first-stage rows
indices address ``x`` only; in scenario rows ``0..n_x-1`` address ``x`` and
``n_x..n_x+n_y-1`` address ``y``.
"""
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from .mip.problem import KIND_CODES, SENSE_CODES

FORMAT_NAME = "smip-json"
FORMAT_VERSION = 1
KINDS = ("cont", "bin", "int")
SENSES = ("le", "eq", "ge")
FAMILIES = ("cap_like", "dcap_like", "sslp_like")


@dataclass(frozen=True)
class VarSpec:
    lb: float
    ub: float
    kind: str = "cont"


@dataclass(frozen=True)
class Row:
    coeffs: Tuple[Tuple[int, float], ...]
    sense: str
    rhs: float


@dataclass(frozen=True)
class Scenario:
    prob: float
    q: Tuple[float, ...]
    second_stage_vars: Tuple[VarSpec, ...]
    rows: Tuple[Row, ...]


def _bounds(specs):
    lb = np.array([v.lb for v in specs], dtype=float)
    ub = np.array([v.ub for v in specs], dtype=float)
    kinds = np.array([KIND_CODES[v.kind] for v in specs], dtype=np.int8)
    return lb, ub, kinds


def _dense(rows, ncols):
    A = np.zeros((len(rows), ncols))
    sense = np.zeros(len(rows), dtype=np.int8)
    rhs = np.zeros(len(rows))
    for i, row in enumerate(rows):
        for j, v in row.coeffs:
            A[i, j] += v
        sense[i] = SENSE_CODES[row.sense]
        rhs[i] = row.rhs
    return A, sense, rhs


@dataclass(frozen=True)
class StochasticProgram:
    name: str
    n_x: int
    n_y: int
    c: Tuple[float, ...]
    first_stage_vars: Tuple[VarSpec, ...]
    first_stage_rows: Tuple[Row, ...]
    scenarios: Tuple[Scenario, ...]

    @property
    def n_scenarios(self):
        return len(self.scenarios)

    @cached_property
    def probs(self):
        return np.array([s.prob for s in self.scenarios])

    @cached_property
    def cost(self):
        return np.array(self.c, dtype=float)

    @cached_property
    def x_bounds(self):
        """``(lb, ub, kinds)`` arrays for the first stage."""
        return _bounds(self.first_stage_vars)

    @cached_property
    def first_stage_matrix(self):
        """``(A, sense, rhs)`` of the first-stage rows over ``x``."""
        return _dense(self.first_stage_rows, self.n_x)

    def scenario_matrix(self, s):
        """``(T, W, sense, rhs)`` with rows ``T x + W y (sense) rhs``."""
        return self._scenario_mats[s]

    def y_bounds(self, s):
        return self._y_bounds[s]

    @cached_property
    def _scenario_mats(self):
        out = []
        for sc in self.scenarios:
            M, sense, rhs = _dense(sc.rows, self.n_x + self.n_y)
            out.append((M[:, : self.n_x], M[:, self.n_x :], sense, rhs))
        return out

    @cached_property
    def _y_bounds(self):
        return [_bounds(sc.second_stage_vars) for sc in self.scenarios]

    @cached_property
    def q_matrix(self):
        return np.array([sc.q for sc in self.scenarios], dtype=float).reshape(self.n_scenarios, self.n_y)


# --- validation --------------------------------------------------------------


def _check_vars(specs, label, out):
    for j, v in enumerate(specs):
        if v.kind not in KINDS:
            out.append(f"unknown kind {v.kind!r} at {label}_{j}")
        if math.isnan(v.lb) or math.isnan(v.ub) or v.lb > v.ub:
            out.append(f"bounds lb > ub at {label}_{j}")
        if v.kind == "bin" and (v.lb < 0 or v.ub > 1):
            out.append(f"binary bound violation at {label}_{j}")
        if v.kind == "int" and not (math.isfinite(v.lb) and math.isfinite(v.ub)):
            out.append(f"integer variable without finite bounds at {label}_{j}")


def _check_rows(rows, ncols, label, out):
    for i, row in enumerate(rows):
        if row.sense not in SENSES:
            out.append(f"unknown sense {row.sense!r} in {label} row {i}")
        if not math.isfinite(row.rhs):
            out.append(f"non-finite rhs in {label} row {i}")
        for j, v in row.coeffs:
            if not 0 <= j < ncols:
                out.append(f"index {j} out of range [0, {ncols}) in {label} row {i}")
            if not math.isfinite(v):
                out.append(f"non-finite coefficient in {label} row {i}")


def validate(program):
    """Return a list of invariant violations; empty means valid."""
    out = []
    if program.n_x < 0 or program.n_y < 0:
        out.append("negative dimension")
    if len(program.c) != program.n_x:
        out.append(f"c has length {len(program.c)}, expected n_x={program.n_x}")
    if len(program.first_stage_vars) != program.n_x:
        out.append(f"first_stage_vars has length {len(program.first_stage_vars)}, expected {program.n_x}")
    if any(not math.isfinite(v) for v in program.c):
        out.append("non-finite first-stage cost")
    _check_vars(program.first_stage_vars, "x", out)
    _check_rows(program.first_stage_rows, program.n_x, "first-stage", out)
    if not program.scenarios:
        out.append("no scenarios")
    total = 0.0
    for s, sc in enumerate(program.scenarios):
        if not sc.prob > 0:
            out.append(f"probability must be positive in scenario {s}")
        total += sc.prob
        if len(sc.q) != program.n_y:
            out.append(f"q has length {len(sc.q)}, expected n_y={program.n_y} in scenario {s}")
        if any(not math.isfinite(v) for v in sc.q):
            out.append(f"non-finite recourse cost in scenario {s}")
        if len(sc.second_stage_vars) != program.n_y:
            out.append(f"second_stage_vars has length {len(sc.second_stage_vars)}, expected {program.n_y} in scenario {s}")
        _check_vars(sc.second_stage_vars, f"s{s}.y", out)
        _check_rows(sc.rows, program.n_x + program.n_y, f"scenario {s}", out)
    if program.scenarios and abs(total - 1.0) > 1e-12:
        out.append(f"probabilities sum to {total:.12g}")
    return out


# --- SMIP-JSON ---------------------------------------------------------------


class ParseError(ValueError):
    """Malformed SMIP-JSON document; ``field`` names the offending entry."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        super().__init__(f"{'/'.join(where)}: {message}" if where else message)


def _num_out(v):
    v = float(v)
    if v == math.inf:
        return None
    if v == -math.inf:
        return None
    return v


def _var_out(v):
    return {"lb": _num_out(v.lb), "ub": _num_out(v.ub), "kind": v.kind}


def _row_out(r):
    return {"coeffs": [[int(j), float(v)] for j, v in r.coeffs], "sense": r.sense, "rhs": float(r.rhs)}


def program_to_dict(program):
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "name": program.name,
        "n_x": program.n_x,
        "n_y": program.n_y,
        "c": [float(v) for v in program.c],
        "first_stage_vars": [_var_out(v) for v in program.first_stage_vars],
        "first_stage_rows": [_row_out(r) for r in program.first_stage_rows],
        "scenarios": [
            {
                "prob": float(sc.prob),
                "q": [float(v) for v in sc.q],
                "second_stage_vars": [_var_out(v) for v in sc.second_stage_vars],
                "rows": [_row_out(r) for r in sc.rows],
            }
            for sc in program.scenarios
        ],
    }


def serialize_instance(program):
    """Canonical SMIP-JSON text (fixed key order, shortest round-trip floats).

    Infinite bounds are written as ``null``.
    """
    return json.dumps(program_to_dict(program), separators=(",", ":"), allow_nan=False) + "\n"


def _expect_keys(obj, keys, field, optional=()):
    if not isinstance(obj, dict):
        raise ParseError("expected an object", field)
    for k in obj:
        if k not in keys and k not in optional:
            raise ParseError(f"unknown field {k!r}", f"{field}.{k}" if field else k)
    for k in keys:
        if k not in obj:
            raise ParseError(f"missing field {k!r}", f"{field}.{k}" if field else k)


def _num(v, field, allow_null=False, null_value=None):
    if v is None and allow_null:
        return null_value
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError("expected a number", field)
    v = float(v)
    if not math.isfinite(v):
        raise ParseError("expected a finite number", field)
    return v


def _int(v, field):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError("expected an integer", field)
    return v


def _list(v, field):
    if not isinstance(v, list):
        raise ParseError("expected a list", field)
    return v


def _var_in(obj, field):
    _expect_keys(obj, ("lb", "ub", "kind"), field)
    kind = obj["kind"]
    if kind not in KINDS:
        raise ParseError(f"kind must be one of {KINDS}", f"{field}.kind")
    lb = _num(obj["lb"], f"{field}.lb", allow_null=True, null_value=-math.inf)
    ub = _num(obj["ub"], f"{field}.ub", allow_null=True, null_value=math.inf)
    return VarSpec(lb, ub, kind)


def _row_in(obj, field, ncols):
    _expect_keys(obj, ("coeffs", "sense", "rhs"), field)
    coeffs = []
    for k, pair in enumerate(_list(obj["coeffs"], f"{field}.coeffs")):
        f = f"{field}.coeffs[{k}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise ParseError("expected [index, value]", f)
        j = _int(pair[0], f)
        if not 0 <= j < ncols:
            raise ParseError(f"index {j} out of range [0, {ncols})", f)
        coeffs.append((j, _num(pair[1], f)))
    if obj["sense"] not in SENSES:
        raise ParseError(f"sense must be one of {SENSES}", f"{field}.sense")
    return Row(tuple(coeffs), obj["sense"], _num(obj["rhs"], f"{field}.rhs"))


def parse_instance(text):
    """Parse SMIP-JSON text into a :class:`StochasticProgram`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    keys = ("format", "version", "name", "n_x", "n_y", "c", "first_stage_vars", "first_stage_rows", "scenarios")
    _expect_keys(doc, keys, "")
    if doc["format"] != FORMAT_NAME:
        raise ParseError(f"format must be {FORMAT_NAME!r}", "format")
    if doc["version"] != FORMAT_VERSION:
        raise ParseError(f"unsupported version {doc['version']!r}", "version")
    if not isinstance(doc["name"], str):
        raise ParseError("expected a string", "name")
    n_x = _int(doc["n_x"], "n_x")
    n_y = _int(doc["n_y"], "n_y")
    if n_x < 0 or n_y < 0:
        raise ParseError("dimension must be non-negative", "n_x" if n_x < 0 else "n_y")
    c = tuple(_num(v, f"c[{i}]") for i, v in enumerate(_list(doc["c"], "c")))
    if len(c) != n_x:
        raise ParseError(f"expected {n_x} entries", "c")
    xv = tuple(_var_in(v, f"first_stage_vars[{i}]") for i, v in enumerate(_list(doc["first_stage_vars"], "first_stage_vars")))
    if len(xv) != n_x:
        raise ParseError(f"expected {n_x} entries", "first_stage_vars")
    xr = tuple(_row_in(r, f"first_stage_rows[{i}]", n_x) for i, r in enumerate(_list(doc["first_stage_rows"], "first_stage_rows")))
    scenarios = []
    for s, sc in enumerate(_list(doc["scenarios"], "scenarios")):
        f = f"scenarios[{s}]"
        _expect_keys(sc, ("prob", "q", "second_stage_vars", "rows"), f)
        prob = _num(sc["prob"], f"{f}.prob")
        if not prob > 0:
            raise ParseError("probability must be positive", f"{f}.prob")
        q = tuple(_num(v, f"{f}.q[{i}]") for i, v in enumerate(_list(sc["q"], f"{f}.q")))
        if len(q) != n_y:
            raise ParseError(f"expected {n_y} entries", f"{f}.q")
        yv = tuple(_var_in(v, f"{f}.second_stage_vars[{i}]") for i, v in enumerate(_list(sc["second_stage_vars"], f"{f}.second_stage_vars")))
        if len(yv) != n_y:
            raise ParseError(f"expected {n_y} entries", f"{f}.second_stage_vars")
        rows = tuple(_row_in(r, f"{f}.rows[{i}]", n_x + n_y) for i, r in enumerate(_list(sc["rows"], f"{f}.rows")))
        scenarios.append(Scenario(prob, q, yv, rows))
    return StochasticProgram(doc["name"], n_x, n_y, c, xv, xr, tuple(scenarios))


def load_instance(path):
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def save_instance(program, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_instance(program))


# --- generators --------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorParams:
    """Size and seed of a generated instance.

    ``m``/``n`` are facilities and clients (cap_like), servers and clients
    (sslp_like) or resources and tasks (dcap_like, with ``periods``).
    """

    family: str
    m: int
    n: int
    scenarios: int
    seed: int = 0
    periods: int = 1

    def validate(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        for name in ("m", "n", "scenarios", "periods"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _row(pairs, sense, rhs):
    return Row(tuple((int(j), float(v)) for j, v in pairs), sense, float(rhs))


def _uniform_probs(S):
    return [1.0 / S] * S


def _ffd_fits(demand, capacity):
    """First-fit decreasing: True if the items certainly pack into the bins."""
    load = np.zeros(len(capacity))
    for d in sorted(demand, reverse=True):
        for i in range(len(capacity)):
            if load[i] + d <= capacity[i]:
                load[i] += d
                break
        else:
            return False
    return True


def _gen_cap(p, rng):
    m, n, S = p.m, p.n, p.scenarios
    fixed = rng.integers(20, 61, size=m)
    assign = rng.integers(1, 21, size=(m, n))
    for _attempt in range(20):
        demand = rng.integers(5, 26, size=(S, n))
        peak = demand.sum(axis=1).max()
        cap = rng.integers(max(int(demand.max()), math.ceil(1.2 * peak / m)), math.ceil(2.0 * peak / m) + max(int(demand.max()), 1) + 1, size=m)
        if all(_ffd_fits(demand[s], cap) for s in range(S)):
            break
    else:
        raise ValueError("cap_like: could not generate capacities that serve every scenario demand")
    n_x, n_y = m, m * n
    yid = lambda i, j: n_x + i * n + j  # noqa: E731
    scenarios = []
    for s in range(S):
        rows = []
        for j in range(n):
            rows.append(_row([(yid(i, j), 1) for i in range(m)], "eq", 1))
        for i in range(m):
            for j in range(n):
                rows.append(_row([(yid(i, j), 1), (i, -1)], "le", 0))
        for i in range(m):
            rows.append(_row([(yid(i, j), demand[s, j]) for j in range(n)] + [(i, -cap[i])], "le", 0))
        scenarios.append(Scenario(_uniform_probs(S)[s], tuple(float(v) for v in assign.ravel()), (VarSpec(0.0, 1.0, "bin"),) * n_y, tuple(rows)))
    return StochasticProgram(
        name=f"cap_like_m{m}_n{n}_s{S}_seed{p.seed}",
        n_x=n_x,
        n_y=n_y,
        c=tuple(float(v) for v in fixed),
        first_stage_vars=(VarSpec(0.0, 1.0, "bin"),) * n_x,
        first_stage_rows=(),
        scenarios=tuple(scenarios),
    )


def _gen_dcap(p, rng):
    R, T, P, S = p.m, p.n, p.periods, p.scenarios
    K = 3  # max expansion units per resource and period
    unit = 5  # capacity per expansion unit
    expand_cost = rng.integers(5, 16, size=(R, P))
    slope = rng.integers(2, 7, size=R)
    free_units = rng.integers(1, 3, size=R)
    assign_cost = rng.integers(1, 11, size=(T, R, P))
    outsource = rng.integers(30, 61, size=(T, P))
    xid = lambda r, t: r * P + t  # noqa: E731
    gid = lambda r: R * P + r  # noqa: E731
    n_x = R * P + R
    first_vars = [VarSpec(0.0, float(K), "int")] * (R * P) + [VarSpec(0.0, float(slope[r] * K * P), "cont") for r in range(R)]
    c = [float(expand_cost[r, t]) for r in range(R) for t in range(P)] + [1.0] * R
    # g_r >= slope_r * (total expansion of r - free units of r)
    first_rows = [
        _row([(xid(r, t), slope[r]) for t in range(P)] + [(gid(r), -1)], "le", slope[r] * free_units[r]) for r in range(R)
    ]
    n_assign = T * R * P
    n_y = n_assign + T * P
    yid = lambda i, r, t: n_x + (i * R + r) * P + t  # noqa: E731
    oid = lambda i, t: n_x + n_assign + i * P + t  # noqa: E731
    q = [float(assign_cost[i, r, t]) for i in range(T) for r in range(R) for t in range(P)] + [
        float(outsource[i, t]) for i in range(T) for t in range(P)
    ]
    scenarios = []
    for s in range(S):
        demand = rng.integers(1, 6, size=(T, P))
        rows = []
        for i in range(T):
            for t in range(P):
                rows.append(_row([(yid(i, r, t), 1) for r in range(R)] + [(oid(i, t), 1)], "eq", 1))
        for r in range(R):
            for t in range(P):
                pairs = [(yid(i, r, t), demand[i, t]) for i in range(T)]
                pairs += [(xid(r, tau), -unit) for tau in range(t + 1)]
                rows.append(_row(pairs, "le", 0))
        scenarios.append(Scenario(_uniform_probs(S)[s], tuple(q), (VarSpec(0.0, 1.0, "bin"),) * n_y, tuple(rows)))
    return StochasticProgram(
        name=f"dcap_like_r{R}_t{T}_p{P}_s{S}_seed{p.seed}",
        n_x=n_x,
        n_y=n_y,
        c=tuple(c),
        first_stage_vars=tuple(first_vars),
        first_stage_rows=tuple(first_rows),
        scenarios=tuple(scenarios),
    )


def _gen_sslp(p, rng):
    m, n, S = p.m, p.n, p.scenarios
    open_cost = rng.integers(40, 81, size=m)
    assign = rng.integers(1, 16, size=(n, m))
    demand = rng.integers(1, 11, size=(n, m))
    low = max(int(demand.max()), n * 2)
    cap = rng.integers(low, max(low, n * 4) + 1, size=m)
    overflow_cost = 50.0
    n_x = m
    n_y = n * m + m
    yid = lambda i, j: n_x + i * m + j  # noqa: E731
    oid = lambda j: n_x + n * m + j  # noqa: E731
    q = [float(assign[i, j]) for i in range(n) for j in range(m)] + [overflow_cost] * m
    yvars = (VarSpec(0.0, 1.0, "bin"),) * (n * m) + tuple(VarSpec(0.0, float(demand[:, j].sum()), "cont") for j in range(m))
    scenarios = []
    for s in range(S):
        present = rng.integers(0, 2, size=n)
        rows = []
        for i in range(n):
            rows.append(_row([(yid(i, j), 1) for j in range(m)], "eq", present[i]))
        for i in range(n):
            for j in range(m):
                rows.append(_row([(yid(i, j), 1), (j, -1)], "le", 0))
        for j in range(m):
            rows.append(_row([(yid(i, j), demand[i, j]) for i in range(n)] + [(oid(j), -1), (j, -cap[j])], "le", 0))
        scenarios.append(Scenario(_uniform_probs(S)[s], tuple(q), yvars, tuple(rows)))
    return StochasticProgram(
        name=f"sslp_like_m{m}_n{n}_s{S}_seed{p.seed}",
        n_x=n_x,
        n_y=n_y,
        c=tuple(float(v) for v in open_cost),
        first_stage_vars=(VarSpec(0.0, 1.0, "bin"),) * n_x,
        first_stage_rows=(_row([(j, 1) for j in range(m)], "ge", 1),),
        scenarios=tuple(scenarios),
    )


_GENERATORS = {"cap_like": _gen_cap, "dcap_like": _gen_dcap, "sslp_like": _gen_sslp}


def generate_instance(params):
    """Deterministically generate an instance of ``params.family``."""
    params.validate()
    rng = np.random.default_rng(params.seed)
    program = _GENERATORS[params.family](params, rng)
    problems = validate(program)
    if problems:  # pragma: no cover - generator bug
        raise AssertionError(f"generated instance is invalid: {problems}")
    return program
