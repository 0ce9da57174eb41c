"""Time the numba and numpy simplex kernels on the same LPs and MILPs.

    python3 benchmarks/bench_kernels.py [--repeat R]

Both backends follow identical pivot rules, so each problem is also
checked for equal objective values and iteration counts.
"""
import argparse
import time

import numpy as np

from smipdecomp import oracle
from smipdecomp.mip import solve_lp, solve_milp
from smipdecomp.mip._kernels import HAVE_NUMBA
from smipdecomp.model import GeneratorParams, generate_instance

CASES = [
    ("sslp_like", 3, 6, 4),
    ("sslp_like", 5, 10, 10),
    ("cap_like", 3, 6, 4),
    ("dcap_like", 2, 3, 4),
]


def _best(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--milp", action="store_true", help="also time branch-and-bound on the extensive forms")
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed")

    backends = ("numba", "numpy")
    # compile outside the timed region
    warm = oracle.build_extensive_form(generate_instance(GeneratorParams(*CASES[0], seed=0)))
    solve_lp(warm, backend="numba")

    print(f"{'instance':<24} {'kind':<5} {'rows':>5} {'cols':>5} {'work':>6} "
          f"{'numba ms':>10} {'numpy ms':>10} {'speed-up':>9}")
    for fam, m, n, S in CASES:
        ef = oracle.build_extensive_form(generate_instance(GeneratorParams(fam, m, n, S, seed=0)))
        kinds = [("lp", lambda b: solve_lp(ef, backend=b))]
        if args.milp:
            kinds.append(("milp", lambda b: solve_milp(ef, backend=b)))
        for kind, fn in kinds:
            res = {b: _best(lambda: fn(b), args.repeat) for b in backends}
            a, b = res["numba"][1], res["numpy"][1]
            if a.status != b.status or not np.isclose(a.objective, b.objective, rtol=1e-9, atol=1e-9):
                raise SystemExit(f"backends disagree on {fam}: {a.objective} vs {b.objective}")
            t_nb, t_np = res["numba"][0], res["numpy"][0]
            work = a.iterations if kind == "lp" else a.nodes
            print(f"{f'{fam} {m}x{n}x{S}':<24} {kind:<5} {ef.m:>5} {ef.n:>5} {work:>6} "
                  f"{t_nb * 1e3:>10.1f} {t_np * 1e3:>10.1f} {t_np / t_nb:>8.2f}x")


if __name__ == "__main__":
    main()
