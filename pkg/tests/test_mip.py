import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import highs
from smipdecomp import oracle
from smipdecomp.mip import LpWorkspace, MilpProblem, solve_lp, solve_milp
from smipdecomp.mip import _kernels as K
from smipdecomp.mip.problem import BIN, EQ, GE, LE
from smipdecomp.model import GeneratorParams, generate_instance

BACKENDS = ["numba", "numpy"]


def random_lp(rng, m=6, n=8):
    A = rng.integers(-4, 5, (m, n)).astype(float)
    rhs = rng.integers(0, 10, m).astype(float)
    c = rng.integers(-5, 6, n).astype(float)
    sense = rng.choice([LE, GE, EQ], size=m, p=[0.6, 0.25, 0.15]).astype(np.int8)
    lb = np.zeros(n)
    ub = rng.choice([3.0, 5.0, np.inf], size=n)
    return MilpProblem(c, A, sense, rhs, lb, ub, np.zeros(n, dtype=np.int8))


def vertex_enumeration(p):
    """Min over basic feasible solutions: every n-subset of active constraints/bounds."""
    n = p.n
    G, h = [], []
    for i in range(p.m):
        G.append(p.A[i])
        h.append(p.rhs[i])
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        G.append(e)
        h.append(p.lb[j])
        if np.isfinite(p.ub[j]):
            G.append(e)
            h.append(p.ub[j])
    G, h = np.array(G), np.array(h)
    eq_rows = [i for i in range(p.m) if p.sense[i] == EQ]
    best = np.inf
    for idx in itertools.combinations(range(len(G)), n):
        if not set(eq_rows) <= set(idx):
            continue
        M = G[list(idx)]
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, h[list(idx)])
        if p.max_violation(x) <= 1e-7:
            best = min(best, float(p.c @ x))
    return best


def test_lp_single_row_dual():
    p = MilpProblem.from_rows([-1.0], [([(0, 1.0)], "le", 3.0)], [0.0], [np.inf])
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(3.0)
    assert sol.objective == pytest.approx(-3.0)
    assert sol.duals[0] == pytest.approx(1.0)


def test_lp_infeasible():
    p = MilpProblem.from_rows([0.0], [([(0, 1.0)], "le", -1.0)], [0.0], [np.inf])
    assert solve_lp(p).status == "infeasible"


def test_lp_unbounded():
    p = MilpProblem.from_rows([-1.0, 0.0], [([(0, 1.0), (1, -1.0)], "le", 1.0)], [0.0, 0.0], [np.inf, np.inf])
    assert solve_lp(p).status == "unbounded"


def test_lp_iteration_limit():
    rng = np.random.default_rng(0)
    p = random_lp(rng, 8, 10)
    sol = solve_lp(p, max_iter=1)
    assert sol.status in ("iteration_limit", "optimal", "infeasible", "unbounded")
    if sol.status == "iteration_limit":
        assert sol.x is None


@pytest.mark.parametrize("seed", range(6))
def test_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    p = random_lp(rng)
    # bound every column so the enumeration is over a polytope
    p = p.with_bounds(p.lb, np.minimum(p.ub, 6.0))
    sol = solve_lp(p)
    ref = vertex_enumeration(p)
    if np.isinf(ref):
        assert sol.status == "infeasible"
    else:
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("seed", range(15))
def test_lp_against_highs_and_complementary_slackness(seed, backend):
    rng = np.random.default_rng(100 + seed)
    p = random_lp(rng, int(rng.integers(3, 10)), int(rng.integers(3, 12)))
    sol = solve_lp(p, backend=backend)
    status, ref, _ = highs(p, relax=True)
    assert sol.status == status
    if status != "optimal":
        return
    assert sol.objective == pytest.approx(ref, abs=1e-7)
    assert p.max_violation(sol.x) <= 1e-7
    lam, d = sol.duals, sol.reduced_costs
    np.testing.assert_allclose(p.c + p.A.T @ lam, d, atol=1e-7)
    # row complementarity and sign
    slack = p.A @ sol.x - p.rhs
    assert np.all(np.abs(lam * slack) <= 1e-7)
    assert np.all(lam[p.sense == LE] >= -1e-7)
    assert np.all(lam[p.sense == GE] <= 1e-7)
    # column complementarity
    at_lb = np.abs(sol.x - p.lb) <= 1e-7
    at_ub = np.abs(sol.x - p.ub) <= 1e-7
    assert np.all(d[~at_lb & ~at_ub] == pytest.approx(0.0, abs=1e-7))
    assert np.all(d[at_lb & ~at_ub] >= -1e-7)
    assert np.all(d[at_ub & ~at_lb] <= 1e-7)


def test_milp_tie_break_lowest_index():
    p = MilpProblem.from_rows([-1.0, -1.0], [([(0, 1.0), (1, 1.0)], "le", 1.0)], [0, 0], [1, 1], kinds=["bin", "bin"])
    sol = solve_milp(p)
    assert sol.objective == pytest.approx(-1.0)
    np.testing.assert_array_equal(sol.x, [1.0, 0.0])


@pytest.mark.parametrize("seed", range(5))
def test_knapsack_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    v = rng.integers(1, 20, 5).astype(float)
    w = rng.integers(1, 10, 5).astype(float)
    cap = float(w.sum() // 2)
    p = MilpProblem.from_rows(-v, [(list(enumerate(w)), "le", cap)], np.zeros(5), np.ones(5), kinds=["bin"] * 5)
    best = max(float(v @ np.array(b)) for b in itertools.product((0, 1), repeat=5) if w @ np.array(b) <= cap)
    assert -solve_milp(p).objective == pytest.approx(best)


def test_smallest_cap_like_matches_brute_force():
    prog = generate_instance(GeneratorParams("cap_like", 1, 1, 1, seed=0))
    ef = oracle.build_extensive_form(prog)
    sol = solve_milp(ef)
    n_int = int(ef.integer_mask.sum())
    assert n_int <= 4
    best = np.inf
    idx = np.flatnonzero(ef.integer_mask)
    for bits in itertools.product((0.0, 1.0), repeat=n_int):
        lb, ub = ef.lb.copy(), ef.ub.copy()
        lb[idx] = ub[idx] = bits
        r = solve_lp(ef.with_bounds(lb, ub))
        if r.status == "optimal":
            best = min(best, r.objective)
    assert sol.objective == pytest.approx(best)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("seed", range(12))
def test_milp_against_highs(seed, backend):
    rng = np.random.default_rng(200 + seed)
    p = random_lp(rng, int(rng.integers(3, 8)), int(rng.integers(3, 9)))
    kinds = rng.choice([0, 1, 2], size=p.n).astype(np.int8)
    ub = np.where(kinds == BIN, 1.0, np.where(np.isinf(p.ub), 7.0, p.ub))
    p = MilpProblem(p.c, p.A, p.sense, p.rhs, p.lb, ub, kinds)
    sol = solve_milp(p, backend=backend)
    status, ref, _ = highs(p)
    assert sol.status == status
    if status == "optimal":
        assert sol.objective == pytest.approx(ref, abs=1e-6)
        assert p.max_violation(sol.x) <= 1e-6
        xi = sol.x[p.integer_mask]
        assert np.all(np.abs(xi - np.round(xi)) <= 1e-6)
        assert sol.bound <= sol.objective + 1e-9


def test_backends_visit_same_bases():
    rng = np.random.default_rng(7)
    p = random_lp(rng, 12, 16)
    a = solve_lp(p, backend="numba")
    b = solve_lp(p, backend="numpy")
    assert a.status == b.status
    assert a.iterations == b.iterations
    if a.status == "optimal":
        np.testing.assert_allclose(a.x, b.x, atol=1e-9)


def test_determinism_identical_bytes():
    prog = generate_instance(GeneratorParams("sslp_like", 2, 4, 3, seed=5))
    ef = oracle.build_extensive_form(prog)
    a, b = solve_milp(ef), solve_milp(ef)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.nodes == b.nodes


def test_node_limit_returns_incumbent_and_bound():
    prog = generate_instance(GeneratorParams("sslp_like", 3, 5, 4, seed=2))
    ef = oracle.build_extensive_form(prog)
    full = solve_milp(ef)
    cut = solve_milp(ef, node_limit=2)
    if cut.status == "iteration_limit":
        assert cut.bound <= full.objective + 1e-9
        if cut.x is not None:
            assert cut.objective >= full.objective - 1e-9
    else:
        assert cut.objective == pytest.approx(full.objective)


def test_integer_columns_need_finite_bounds():
    p = MilpProblem.from_rows([1.0], [], [0.0], [np.inf], kinds=["int"])
    with pytest.raises(ValueError):
        solve_milp(p)


def test_lp_bound_below_milp():
    for seed in range(5):
        prog = generate_instance(GeneratorParams("cap_like", 2, 3, 2, seed=seed))
        ef = oracle.build_extensive_form(prog)
        assert solve_lp(ef).objective <= solve_milp(ef).objective + 1e-9


def test_degenerate_root_lp_terminates():
    # highly degenerate extensive form on which pure Dantzig pricing cycles
    prog = generate_instance(GeneratorParams("sslp_like", 5, 10, 10, seed=3))
    ef = oracle.build_extensive_form(prog).relaxed()
    sol = solve_lp(ef)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(highs(ef, relax=True)[1], abs=1e-7)


def test_warm_start_matches_cold():
    rng = np.random.default_rng(3)
    p = random_lp(rng, 8, 10)
    p = p.with_bounds(p.lb, np.minimum(p.ub, 4.0))
    ws = LpWorkspace(p)
    if ws.solve() != "optimal":
        pytest.skip("random LP not optimal")
    snap = ws.snapshot()
    ub = p.ub.copy()
    ub[0] = 0.0
    ws.set_bounds(p.lb, ub)
    status = ws.solve(warm=snap)
    cold = solve_lp(p.with_bounds(p.lb, ub))
    assert status == cold.status
    if status == "optimal":
        assert float(p.c @ ws.primal_values()) == pytest.approx(cold.objective, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kernels_agree_property(seed):
    rng = np.random.default_rng(seed)
    p = random_lp(rng, int(rng.integers(2, 7)), int(rng.integers(2, 7)))
    a = solve_lp(p, backend="numba")
    b = solve_lp(p, backend="numpy")
    assert a.status == b.status
    if a.status == "optimal":
        assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_kernel_selection():
    assert K.kernels("numpy") == (K.primal_loop_np, K.dual_loop_np)
    with pytest.raises(ValueError):
        K.kernels("cuda")


def test_problem_validation():
    p = MilpProblem.from_rows([1.0], [], [2.0], [1.0])
    with pytest.raises(ValueError, match="lb > ub"):
        p.validate()
    q = MilpProblem.from_rows([1.0], [], [0.0], [2.0], kinds=["bin"])
    with pytest.raises(ValueError, match="binary"):
        q.validate()
