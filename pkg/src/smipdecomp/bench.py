"""Experiment harness: run PBGS, PH and the exact oracle over a grid and summarise.

Rows are streamed to CSV as they finish.  Floats are written with ``repr``
(shortest round-trip decimal), so reading a file back gives bit-identical
rows.
"""
import csv
import dataclasses
import io
import json
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import List, Optional

from . import oracle, pbgs, ph
from .model import GeneratorParams, generate_instance

METHODS = ("pbgs", "ph", "exact")
ERROR = "error"


@dataclass(frozen=True)
class ExperimentGrid:
    family: str
    m: int
    n: int
    scenarios: int
    seeds: List[int]
    methods: List[str]
    rho0: List[float] = field(default_factory=lambda: [1.0])
    beta: List[float] = field(default_factory=lambda: [1.25])
    gamma_factor: List[float] = field(default_factory=lambda: [1.0])
    ph_rho: Optional[List[float]] = None  # defaults to rho0
    time_limit: float = 60.0
    eps: float = 1e-3
    k_max: int = 50
    l_max: int = 20
    periods: int = 1
    threads: int = 1

    def validate(self):
        for name in ("seeds", "methods", "rho0", "beta", "gamma_factor"):
            if not getattr(self, name):
                raise ValueError(f"grid field {name!r} must be a non-empty list")
        if self.ph_rho is not None and not self.ph_rho:
            raise ValueError("grid field 'ph_rho' must be a non-empty list")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        GeneratorParams(self.family, self.m, self.n, self.scenarios, 0, self.periods).validate()
        return self

    @property
    def ph_rhos(self):
        return self.ph_rho if self.ph_rho is not None else self.rho0

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ValueError(f"unknown grid fields {unknown}")
        return cls(**d).validate()

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ResultRow:
    instance_id: str
    family: str
    seed: int
    method: str
    rho0: Optional[float]
    beta: Optional[float]
    gamma_factor: Optional[float]
    outer_iters: int
    inner_iters: int
    wall_ms: float
    residual: Optional[float]
    objective: float
    exact_objective: Optional[float]
    gap: Optional[float]
    converged: bool
    status: str
    subproblem_solves: int
    bb_nodes: int
    time_limited: bool


FIELDS = [f.name for f in dataclasses.fields(ResultRow)]
_INT_FIELDS = {"seed", "outer_iters", "inner_iters", "subproblem_solves", "bb_nodes"}
_BOOL_FIELDS = {"converged", "time_limited"}
_STR_FIELDS = {"instance_id", "family", "method", "status"}


def relative_gap(obj, exact):
    if exact is None or not math.isfinite(obj):
        return None
    if exact == 0:
        return 0.0 if obj == 0 else None
    return (obj - exact) / abs(exact)


# --- CSV ------------------------------------------------------------------------------


def _cell(name, v):
    if v is None:
        return ""
    if name in _BOOL_FIELDS:
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(name, s):
    if name in _STR_FIELDS:
        return s
    if s == "":
        return None
    if name in _BOOL_FIELDS:
        if s not in ("true", "false"):
            raise ValueError(f"bad boolean {s!r} in column {name}")
        return s == "true"
    if name in _INT_FIELDS:
        return int(s)
    return float(s)


class CsvSink:
    """Writes the header once and flushes after every row."""

    def __init__(self, fh):
        self.fh = fh
        self.writer = csv.writer(fh, lineterminator="\n")
        self.writer.writerow(FIELDS)
        fh.flush()

    def write(self, row):
        self.writer.writerow([_cell(f, getattr(row, f)) for f in FIELDS])
        self.fh.flush()


def write_results(rows, fh):
    sink = CsvSink(fh)
    for r in rows:
        sink.write(r)


def read_results(source):
    """Parse CSV text, an open file or a path into ``ResultRow`` objects."""
    if hasattr(source, "read"):
        text = source.read()
    elif "\n" in source:
        text = source
    else:
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != FIELDS:
        raise ValueError(f"unexpected CSV header {header}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(FIELDS):
            raise ValueError(f"line {lineno}: expected {len(FIELDS)} fields, got {len(rec)}")
        rows.append(ResultRow(**{f: _parse(f, v) for f, v in zip(FIELDS, rec)}))
    return rows


# --- running ------------------------------------------------------------------------------


def _instance_id(grid, seed):
    size = f"{grid.m}x{grid.n}x{grid.scenarios}"
    if grid.periods != 1:
        size += f"x{grid.periods}"
    return f"{grid.family}-{size}-s{seed}"


def _error_row(base, method, params, exc):
    return ResultRow(**base, method=method, rho0=params[0], beta=params[1], gamma_factor=params[2],
                     outer_iters=0, inner_iters=0, wall_ms=0.0, residual=None, objective=math.inf,
                     exact_objective=None, gap=None, converged=False,
                     status=f"{ERROR}: {type(exc).__name__}: {exc}", subproblem_solves=0, bb_nodes=0,
                     time_limited=False)


def _method_row(base, method, params, report, exact):
    ev = report.evaluation
    obj = ev.objective if ev is not None and ev.feasible else math.inf
    if method == "pbgs":
        outer, inner = report.outer_iterations, report.inner_iterations
    else:
        outer, inner = report.iterations, report.iterations
    return ResultRow(**base, method=method, rho0=params[0], beta=params[1], gamma_factor=params[2],
                     outer_iters=outer, inner_iters=inner, wall_ms=report.wall_time * 1000.0,
                     residual=float(report.residual), objective=obj, exact_objective=exact,
                     gap=relative_gap(obj, exact), converged=report.converged, status=report.termination,
                     subproblem_solves=report.subproblem_solves, bb_nodes=report.bb_nodes,
                     time_limited=report.termination == pbgs.TIME_LIMIT)


def run_experiment(grid, out=None, solver=None, progress=None):
    """Run every (seed, method, parameters) cell; return the rows.

    ``out`` is a path or a text file; rows are streamed to it as CSV.  For
    each seed the exact oracle runs first (when requested) so later rows
    can report their gap.  A failing cell becomes a row whose status starts
    with ``error``; the grid carries on.
    """
    grid.validate()
    rows = []
    own = isinstance(out, str)
    fh = open(out, "w", encoding="utf-8", newline="") if own else out
    sink = CsvSink(fh) if fh is not None else None

    def emit(row):
        rows.append(row)
        if sink is not None:
            sink.write(row)
        if progress is not None:
            progress(row)

    try:
        for seed in grid.seeds:
            iid = _instance_id(grid, seed)
            base = dict(instance_id=iid, family=grid.family, seed=seed)
            program = generate_instance(GeneratorParams(grid.family, grid.m, grid.n, grid.scenarios, seed, grid.periods))
            exact = None
            if "exact" in grid.methods:
                t0 = time.perf_counter()
                try:
                    sol = oracle.solve_exact(program, solver=solver)
                    wall = time.perf_counter() - t0
                    exact = sol.objective if sol.status == "optimal" else None
                    emit(ResultRow(**base, method="exact", rho0=None, beta=None, gamma_factor=None,
                                   outer_iters=0, inner_iters=0, wall_ms=wall * 1000.0, residual=None,
                                   objective=sol.objective, exact_objective=exact,
                                   gap=relative_gap(sol.objective, exact), converged=sol.status == "optimal",
                                   status=sol.status, subproblem_solves=1, bb_nodes=sol.nodes, time_limited=False))
                except Exception as exc:  # recorded, never fatal
                    emit(_error_row(base, "exact", (None, None, None), exc))
            if "pbgs" in grid.methods:
                for rho0 in grid.rho0:
                    for beta in grid.beta:
                        for gf in grid.gamma_factor:
                            key = (float(rho0), float(beta), float(gf))
                            params = pbgs.PbgsParams(rho0=rho0, beta=beta, gamma_factor=gf, eps=grid.eps,
                                                     l_max=grid.l_max, k_max=grid.k_max, seed=seed,
                                                     threads=grid.threads, time_limit=grid.time_limit)
                            try:
                                rep = pbgs.run_pbgs(program, params, solver=solver)
                                emit(_method_row(base, "pbgs", key, rep, exact))
                            except Exception as exc:
                                emit(_error_row(base, "pbgs", key, exc))
            if "ph" in grid.methods:
                for rho in grid.ph_rhos:
                    key = (float(rho), None, None)
                    params = ph.PhParams(rho=rho, eps=grid.eps, k_max=grid.k_max, threads=grid.threads,
                                         time_limit=grid.time_limit, seed=seed)
                    try:
                        rep = ph.run_ph(program, params, solver=solver)
                        emit(_method_row(base, "ph", key, rep, exact))
                    except Exception as exc:
                        emit(_error_row(base, "ph", key, exc))
    finally:
        if own:
            fh.close()
    return rows


# --- summary ------------------------------------------------------------------------------


@dataclass
class SummaryRow:
    rho0: float
    beta: float
    gamma_factor: float
    n_pairs: int
    obj_diff_mean: float
    obj_diff_std: float
    speedup_mean: float
    speedup_std: float
    n_speedup: int
    ph_conv_fraction: float


@dataclass
class SummaryTable:
    rows: List[SummaryRow]

    def format(self):
        head = f"{'rho0':>6} {'beta':>6} {'gamma':>6} {'pairs':>5} | {'obj diff mean':>14} {'(std)':>10} | {'speed-up':>9} {'(std)':>9} | {'PH conv.':>8}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r.rho0:>6g} {r.beta:>6g} {r.gamma_factor:>6g} {r.n_pairs:>5d} | "
                f"{_fmt(r.obj_diff_mean, '14.6f')} {_fmt(r.obj_diff_std, '10.6f')} | "
                f"{_fmt(r.speedup_mean, '9.3f')} {_fmt(r.speedup_std, '9.3f')} | {r.ph_conv_fraction:>8.3f}"
            )
        return "\n".join(lines)


def _fmt(v, spec):
    width = int(spec.split(".")[0])
    return format(v, spec) if math.isfinite(v) else "n/a".rjust(width)


def _mean_std(vals):
    if not vals:
        return math.nan, math.nan
    mean = statistics.fmean(vals)
    std = statistics.stdev(vals) if len(vals) > 1 else math.nan
    return mean, std


def _is_timeout(row):
    return row.time_limited or row.status == pbgs.TIME_LIMIT


def summarize(rows):
    """Pair every PBGS row with the PH row on the same instance and summarise.

    The PH partner of a PBGS row with ``rho0 = r`` is the PH row with
    ``rho0 = r``; when an instance has a single PH row that row is used for
    every PBGS combination.  Per PBGS parameter combination:

    - objective difference ``(z_PBGS - z_PH) / z_PH``: mean and sample
      standard deviation;
    - speed-up ``wall_PH / wall_PBGS``: mean and sample standard deviation;
    - PH convergence fraction over all pairs.

    Pairs in which PH hit the time limit are left out of both averages,
    as are pairs with a non-finite objective on either side.

    Raises ``ValueError`` when a PBGS row has no PH partner.
    """
    ph_rows = {}
    for r in rows:
        if r.method == "ph":
            ph_rows.setdefault(r.instance_id, []).append(r)
    groups = {}
    for r in rows:
        if r.method != "pbgs":
            continue
        cands = ph_rows.get(r.instance_id, [])
        match = [p for p in cands if p.rho0 == r.rho0]
        if len(match) != 1:
            match = cands if len(cands) == 1 else []
        if len(match) != 1:
            raise ValueError(f"no unique PH row to pair with PBGS row {r.instance_id} rho0={r.rho0}")
        groups.setdefault((r.rho0, r.beta, r.gamma_factor), []).append((r, match[0]))
    out = []
    for key in sorted(groups):
        pairs = groups[key]
        kept = [(a, b) for a, b in pairs if not _is_timeout(b)
                and math.isfinite(a.objective) and math.isfinite(b.objective)]
        diffs = [(a.objective - b.objective) / b.objective for a, b in kept if b.objective != 0]
        speed = [b.wall_ms / a.wall_ms for a, b in kept if a.wall_ms > 0]
        dm, ds = _mean_std(diffs)
        sm, ss = _mean_std(speed)
        conv = sum(1 for _, b in pairs if b.converged) / len(pairs)
        out.append(SummaryRow(key[0], key[1], key[2], len(pairs), dm, ds, sm, ss, len(speed), conv))
    return SummaryTable(out)
