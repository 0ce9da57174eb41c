"""Stand-in external solver: reads a CPLEX LP file, solves it with scipy HiGHS.

    python3 fake_lp_solver.py MODEL.lp SOLUTION.sol [--layout gurobi|highs]

Only the LP subset produced by ``smipdecomp.mip.external.write_lp`` is
understood.  Writes nothing when the model is infeasible (Gurobi layout)
or a ``Model status`` block (HiGHS layout).
"""
import argparse
import re

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

TERM = re.compile(r"([+-])\s*([0-9.eE+-]+|inf)\s+([A-Za-z_][\w.\[\]]*)")


def parse_lp(text):
    section, names, obj, rows, bounds, ints = None, {}, {}, [], {}, set()
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "general", "end"):
            section = low
            continue
        if section == "minimize":
            body = line.split(":", 1)[1] if ":" in line else line
            for sgn, v, nm in TERM.findall(body):
                names.setdefault(nm, len(names))
                obj[nm] = obj.get(nm, 0.0) + (-1 if sgn == "-" else 1) * float(v)
        elif section == "subject to":
            if ":" in line and not line.startswith(("+", "-")):
                current = {"coefs": {}, "sense": None, "rhs": None}
                rows.append(current)
                line = line.split(":", 1)[1]
            m = re.search(r"(<=|>=|=)\s*(\S+)\s*$", line)
            body = line[: m.start()] if m else line
            for sgn, v, nm in TERM.findall(body):
                names.setdefault(nm, len(names))
                current["coefs"][nm] = current["coefs"].get(nm, 0.0) + (-1 if sgn == "-" else 1) * float(v)
            if m:
                current["sense"], current["rhs"] = m.group(1), float(m.group(2))
        elif section == "bounds":
            parts = line.split()
            if len(parts) == 2 and parts[1] == "free":
                bounds[parts[0]] = (-np.inf, np.inf)
            elif len(parts) == 3 and parts[1] == ">=":
                bounds[parts[0]] = (float(parts[2]), np.inf)
            else:
                bounds[parts[2]] = (float(parts[0]), float(parts[4]))
        elif section == "general":
            ints.add(line)
    for nm in list(bounds) + sorted(ints):
        names.setdefault(nm, len(names))
    return names, obj, rows, bounds, ints


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("lp")
    ap.add_argument("sol")
    ap.add_argument("--layout", default="gurobi")
    args = ap.parse_args()
    with open(args.lp) as fh:
        names, obj, rows, bounds, ints = parse_lp(fh.read())
    n = len(names)
    c = np.zeros(n)
    for nm, v in obj.items():
        c[names[nm]] = v
    A = np.zeros((len(rows), n))
    lo = np.full(len(rows), -np.inf)
    hi = np.full(len(rows), np.inf)
    for i, r in enumerate(rows):
        for nm, v in r["coefs"].items():
            A[i, names[nm]] = v
        if r["sense"] in ("<=", "="):
            hi[i] = r["rhs"]
        if r["sense"] in (">=", "="):
            lo[i] = r["rhs"]
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for nm, (a, b) in bounds.items():
        lb[names[nm]], ub[names[nm]] = a, b
    integrality = np.zeros(n)
    for nm in ints:
        integrality[names[nm]] = 1
    cons = [LinearConstraint(A, lo, hi)] if len(rows) else []
    res = milp(c, constraints=cons, integrality=integrality, bounds=Bounds(lb, ub), options={"presolve": False})
    order = sorted(names, key=names.get)
    if args.layout == "highs":
        status = {0: "Optimal", 2: "Infeasible", 3: "Unbounded"}.get(res.status, "Time limit reached")
        with open(args.sol, "w") as fh:
            fh.write(f"Model status\n{status}\n\n# Primal solution values\n")
            if res.status == 0:
                fh.write(f"Feasible\nObjective {float(res.fun)!r}\n# Columns {n}\n")
                fh.writelines(f"{nm} {float(res.x[names[nm]])!r}\n" for nm in order)
                fh.write(f"# Rows {len(rows)}\n")
            else:
                fh.write("None\n")
        return
    if res.status != 0:
        return
    with open(args.sol, "w") as fh:
        fh.write(f"# Objective value = {float(res.fun)!r}\n")
        fh.writelines(f"{nm} {float(res.x[names[nm]])!r}\n" for nm in order)


if __name__ == "__main__":
    main()
