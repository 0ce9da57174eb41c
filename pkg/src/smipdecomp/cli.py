"""Command-line interface.

Exit codes: 0 success, 1 infeasible or no consensus, 2 usage or bad input,
3 internal error.
"""
import argparse
import json
import sys

import numpy as np

from . import bench, oracle, pbgs, penalty, ph
from .model import GeneratorParams, ParseError, generate_instance, load_instance, save_instance

EXIT_OK, EXIT_NO_SOLUTION, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _fmt_vec(v):
    return "[" + ", ".join(f"{float(a):g}" for a in np.asarray(v).ravel()) + "]"


def _solver(args):
    if args.solver_cmd:
        from .mip.external import ExternalSolver

        return ExternalSolver(args.solver_cmd)
    return None


def _load(path):
    try:
        return load_instance(path)
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {path}") from exc
    except (ParseError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


# --- subcommands ------------------------------------------------------------------


def cmd_gen(args):
    sizes = args.sizes
    if len(sizes) not in (2, 3):
        raise UsageError("--sizes takes M N [PERIODS]")
    periods = sizes[2] if len(sizes) == 3 else 1
    try:
        params = GeneratorParams(args.family, sizes[0], sizes[1], args.scenarios, args.seed, periods)
        params.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    program = generate_instance(params)
    save_instance(program, args.out)
    print(f"wrote {args.out}: n_x={program.n_x} n_y={program.n_y} scenarios={program.n_scenarios}")
    return EXIT_OK


def cmd_solve_exact(args):
    program = _load(args.file)
    sol = oracle.solve_exact(program, solver=_solver(args))
    print(f"status: {sol.status}")
    if sol.x is None:
        return EXIT_NO_SOLUTION
    print(f"objective: {sol.objective!r}")
    print(f"x: {_fmt_vec(sol.x)}")
    print(f"nodes: {sol.nodes}")
    return EXIT_OK if sol.status == "optimal" else EXIT_NO_SOLUTION


def _report(rep, outer, inner):
    ev = rep.evaluation
    print(f"termination: {rep.termination}")
    print(f"outer iterations: {outer}")
    print(f"inner iterations: {inner}")
    print(f"residual: {rep.residual!r}")
    print(f"z: {_fmt_vec(rep.z)}")
    print(f"wall seconds: {rep.wall_time:.3f}")
    print(f"subproblem solves: {rep.subproblem_solves}")
    print(f"branch-and-bound nodes: {rep.bb_nodes}")
    if ev is not None and ev.feasible:
        print(f"evaluated objective: {ev.objective!r}")
    else:
        print(f"evaluated objective: infeasible ({ev.reason if ev is not None else 'not evaluated'})")
    ok = rep.converged and ev is not None and ev.feasible
    return EXIT_OK if ok else EXIT_NO_SOLUTION


def cmd_solve_pbgs(args):
    program = _load(args.file)
    params = pbgs.PbgsParams(
        rho0=args.rho0, beta=args.beta, gamma_factor=args.gamma_factor, eps=args.eps, l_max=args.lmax,
        k_max=args.kmax, tie_break={"keep": pbgs.KEEP_PREVIOUS, "coin": pbgs.COIN_FLIP}[args.tie_break],
        multiplier_exponent={"kminus1": "k_minus_1", "k": "k"}[args.mult_exponent], threads=args.threads,
        time_limit=args.time_limit, seed=args.seed,
    )
    try:
        params.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rep = pbgs.run_pbgs(program, params, solver=_solver(args))
    return _report(rep, rep.outer_iterations, rep.inner_iterations)


def cmd_solve_ph(args):
    program = _load(args.file)
    params = ph.PhParams(rho=args.rho, eps=args.eps, k_max=args.kmax, threads=args.threads,
                         time_limit=args.time_limit, breakpoints=args.breakpoints)
    try:
        params.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rep = ph.run_ph(program, params, solver=_solver(args))
    code = _report(rep, rep.iterations, rep.iterations)
    print(f"dual residual: {rep.dual_residuals[-1]!r}")
    return code


def cmd_bench(args):
    try:
        grid = bench.ExperimentGrid.load(args.grid)
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {args.grid}") from exc
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{args.grid}: {exc}") from exc

    def progress(row):
        print(f"{row.instance_id} {row.method} rho0={row.rho0} beta={row.beta} gamma={row.gamma_factor} "
              f"status={row.status} objective={row.objective!r} wall_ms={row.wall_ms:.1f}", flush=True)

    rows = bench.run_experiment(grid, args.out, solver=_solver(args), progress=None if args.quiet else progress)
    errors = sum(1 for r in rows if r.status.startswith(bench.ERROR))
    print(f"wrote {len(rows)} rows to {args.out} ({errors} errors)")
    return EXIT_OK


def cmd_summarize(args):
    try:
        rows = bench.read_results(args.file)
        table = bench.summarize(rows)
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {args.file}") from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(table.format())
    return EXIT_OK


def cmd_verify_penalty(args):
    if args.builtin is not None:
        vectors = penalty.BUILTIN_BASES[args.builtin](args.dim)
    else:
        try:
            with open(args.basis, encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise UsageError(f"no such file: {args.basis}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.basis}: {exc}") from exc
        vectors = data["vectors"] if isinstance(data, dict) else data
    try:
        chk = penalty.is_positive_basis(vectors)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    N = np.atleast_2d(np.asarray(vectors, dtype=float))
    print(f"vectors: {N.shape[0]} in R^{N.shape[1]}")
    if not chk.spans:
        print("positive basis: no")
        print(f"witness direction: {_fmt_vec(chk.witness)}")
        return EXIT_NO_SOLUTION
    print("positive basis: yes")
    basis = penalty.PositiveBasis(N, chk)
    for name, f in (("psi_inf", penalty.psi_inf(N)), ("psi_one", penalty.psi_one(N))):
        cert = penalty.estimate_growth_constants(f, basis, eps=args.eps, n_samples=args.samples, seed=args.seed)
        print(f"{name}: delta={cert.delta:.6g} gamma={cert.gamma:.6g} "
              f"min ratio inside={cert.min_ratio_inside:.6g} min value outside={cert.min_value_outside:.6g}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="smipdecomp", description="Scenario decomposition heuristics for two-stage SMIPs.")
    ap.add_argument("--solver-cmd", metavar="CMD",
                    help="external MILP solver command; {lp} and {sol} are replaced by file paths")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance")
    p.add_argument("--family", required=True, choices=["cap_like", "sslp_like", "dcap_like"])
    p.add_argument("--sizes", required=True, type=int, nargs="+", metavar="N", help="M N [PERIODS]")
    p.add_argument("--scenarios", required=True, type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve-exact", help="solve the extensive form")
    p.add_argument("file")
    p.set_defaults(func=cmd_solve_exact)

    p = sub.add_parser("solve-pbgs", help="run the penalty-based Gauss-Seidel heuristic")
    p.add_argument("file")
    p.add_argument("--rho0", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.25)
    p.add_argument("--gamma-factor", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--lmax", type=int, default=20)
    p.add_argument("--kmax", type=int, default=50)
    p.add_argument("--tie-break", choices=["keep", "coin"], default="keep")
    p.add_argument("--mult-exponent", choices=["kminus1", "k"], default="kminus1")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_solve_pbgs)

    p = sub.add_parser("solve-ph", help="run progressive hedging")
    p.add_argument("file")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--kmax", type=int, default=50)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--breakpoints", type=int, default=8)
    p.set_defaults(func=cmd_solve_ph)

    p = sub.add_parser("bench", help="run an experiment grid")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("summarize", help="summarise a results CSV")
    p.add_argument("file")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("verify-penalty", help="check a positive basis and its growth constants")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--basis", metavar="FILE", help='JSON list of vectors, or {"vectors": [...]}')
    g.add_argument("--builtin", choices=sorted(penalty.BUILTIN_BASES))
    p.add_argument("--dim", type=int, default=2, help="dimension for --builtin")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify_penalty)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - mapped to the internal-error exit code
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
