"""External MILP backend: LP-format file out, solution file in.

The command is a template such as ``"gurobi_cl ResultFile={sol} {lp}"`` or
``"highs --model_file {lp} --solution_file {sol}"``.  ``{lp}`` and
``{sol}`` are replaced by temporary paths; a template without either
placeholder gets ``{lp} {sol}`` appended.

Two solution layouts are understood: the Gurobi ``.sol`` layout
(``# Objective value = v`` then ``name value`` lines) and the HiGHS
solution layout (``Model status`` block, then ``# Columns`` values).
"""
import math
import os
import shlex
import subprocess
import tempfile

import numpy as np

from .problem import BIN, EQ, GE, INFEASIBLE, INT, ITERATION_LIMIT, LE, OPTIMAL, UNBOUNDED, MilpSolution

_SENSE_OPS = {LE: "<=", EQ: "=", GE: ">="}
_TERMS_PER_LINE = 8


def column_names(problem):
    if problem.names is not None:
        return [_safe(str(nm)) for nm in problem.names]
    return [f"x{j}" for j in range(problem.n)]


def _safe(name):
    out = "".join(ch if ch.isalnum() or ch in "_.[]" else "_" for ch in name)
    return out if out and not out[0].isdigit() and out[0] != "." else "v_" + out


def _num(v):
    return repr(float(v))


def _terms(coefs, names):
    parts = []
    for j, v in coefs:
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_num(abs(v))} {names[j]}")
    if not parts:
        parts.append(f"+ 0.0 {names[0]}")
    lines = [" ".join(parts[k : k + _TERMS_PER_LINE]) for k in range(0, len(parts), _TERMS_PER_LINE)]
    return "\n   ".join(lines)


def write_lp(problem, path=None):
    """Write ``problem`` in CPLEX LP text format; return the text.

    Every column gets explicit bounds.  Binary and integer columns are both
    listed under ``General`` so that tightened branch-and-bound bounds on a
    binary are kept verbatim.  The objective offset is not written.
    """
    if problem.n == 0:
        raise ValueError("LP format needs at least one column")
    names = column_names(problem)
    out = ["\\ written by smipdecomp", "Minimize"]
    obj = [(j, v) for j, v in enumerate(problem.c) if v != 0.0]
    out.append(" obj: " + _terms(obj, names))
    out.append("Subject To")
    for i in range(problem.m):
        row = problem.A[i]
        nz = [(j, row[j]) for j in np.flatnonzero(row)]
        out.append(f" c{i}: {_terms(nz, names)} {_SENSE_OPS[int(problem.sense[i])]} {_num(problem.rhs[i])}")
    out.append("Bounds")
    for j, nm in enumerate(names):
        lo, hi = problem.lb[j], problem.ub[j]
        if lo == -math.inf and hi == math.inf:
            out.append(f" {nm} free")
        elif hi == math.inf:
            out.append(f" {nm} >= {_num(lo)}")
        else:
            lo_s = "-inf" if lo == -math.inf else _num(lo)
            out.append(f" {lo_s} <= {nm} <= {_num(hi)}")
    ints = [names[j] for j in range(problem.n) if problem.kinds[j] in (BIN, INT)]
    if ints:
        out.append("General")
        out.extend(" " + nm for nm in ints)
    out.append("End")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


_STATUS_WORDS = {
    "optimal": OPTIMAL,
    "infeasible": INFEASIBLE,
    "unbounded": UNBOUNDED,
    "primal infeasible or unbounded": INFEASIBLE,
    "time limit reached": ITERATION_LIMIT,
    "iteration limit reached": ITERATION_LIMIT,
    "iteration_limit": ITERATION_LIMIT,
}


def read_solution(text, names):
    """Parse solution text into ``(status, values)``.

    ``values`` maps column index to value; columns not mentioned are 0.
    Returns ``status=None`` when the file does not state one.
    """
    index = {nm: j for j, nm in enumerate(names)}
    values = {}
    status = None
    lines = [ln.strip() for ln in text.splitlines()]
    if lines and lines[0].lower() == "model status":
        status = _STATUS_WORDS.get(lines[1].lower(), ITERATION_LIMIT) if len(lines) > 1 else None
        in_cols = False
        for ln in lines[2:]:
            if ln.startswith("# Columns"):
                in_cols = True
                continue
            if ln.startswith("#"):
                if in_cols:
                    break
                continue
            if in_cols and ln:
                parts = ln.split()
                if parts[0] in index:
                    values[index[parts[0]]] = float(parts[1])
        return status, values
    for ln in lines:
        if not ln:
            continue
        if ln.startswith("#"):
            body = ln.lstrip("#").strip()
            if body.lower().startswith("status"):
                word = body.split("=", 1)[-1].strip().lower()
                status = _STATUS_WORDS.get(word, ITERATION_LIMIT)
            continue
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"malformed solution line {ln!r}")
        if parts[0] not in index:
            raise ValueError(f"unknown column {parts[0]!r} in solution")
        values[index[parts[0]]] = float(parts[1])
    if status is None and values:
        status = OPTIMAL
    return status, values


class ExternalSolver:
    """Callable with the ``solve_milp`` signature that shells out to ``cmd``."""

    def __init__(self, cmd, timeout=None, keep_files=False):
        self.argv = shlex.split(cmd)
        if not self.argv:
            raise ValueError("empty solver command")
        if not any("{lp}" in a or "{sol}" in a for a in self.argv):
            self.argv += ["{lp}", "{sol}"]
        self.timeout = timeout
        self.keep_files = keep_files

    def __call__(self, problem, **_options):
        names = column_names(problem)
        tmp = tempfile.mkdtemp(prefix="smipdecomp-")
        lp_path = os.path.join(tmp, "model.lp")
        sol_path = os.path.join(tmp, "model.sol")
        try:
            write_lp(problem, lp_path)
            argv = [a.replace("{lp}", lp_path).replace("{sol}", sol_path) for a in self.argv]
            try:
                proc = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout)
            except subprocess.TimeoutExpired:
                return MilpSolution(ITERATION_LIMIT, None, math.nan, -math.inf)
            if proc.returncode != 0:
                raise RuntimeError(f"solver command exited with {proc.returncode}: {proc.stderr.strip()[-500:]}")
            if not os.path.exists(sol_path):
                return MilpSolution(INFEASIBLE, None, math.inf, math.inf)
            with open(sol_path, encoding="utf-8") as fh:
                status, values = read_solution(fh.read(), names)
        finally:
            if not self.keep_files:
                for p in (lp_path, sol_path):
                    if os.path.exists(p):
                        os.remove(p)
                os.rmdir(tmp)
            else:
                self.last_files = (lp_path, sol_path)
        if status != OPTIMAL:
            status = status or INFEASIBLE
            obj = {INFEASIBLE: math.inf, UNBOUNDED: -math.inf}.get(status, math.nan)
            return MilpSolution(status, None, obj, obj if status != ITERATION_LIMIT else -math.inf)
        x = np.zeros(problem.n)
        for j, v in values.items():
            x[j] = v
        x[problem.integer_mask] = np.round(x[problem.integer_mask]) + 0.0
        obj = problem.objective(x)
        return MilpSolution(OPTIMAL, x, obj, obj)
