import itertools

import numpy as np
import pytest

from helpers import enumerate_exact, highs, tiny_program
from smipdecomp.mip import solve_lp, solve_milp
from smipdecomp.model import GeneratorParams, Row, Scenario, StochasticProgram, VarSpec, generate_instance
from smipdecomp.oracle import (
    augmented_dual_value,
    build_extensive_form,
    build_split_form,
    find_exactness_threshold,
    lagrangian_bound,
    lp_nac_multipliers,
    solve_exact,
)


def conflict_program():
    """One binary; scenario 0 wants x = 1, scenario 1 wants x = 0; optimum 5, wait-and-see 0."""
    yv = (VarSpec(0.0, 1.0, "cont"),)
    s0 = Scenario(0.5, (10.0,), yv, (Row(((0, 1.0), (1, 1.0)), "ge", 1.0),))
    s1 = Scenario(0.5, (10.0,), yv, (Row(((0, -1.0), (1, 1.0)), "ge", 0.0),))
    return StochasticProgram("conflict", 1, 1, (0.0,), (VarSpec(0.0, 1.0, "bin"),), (), (s0, s1))


def test_extensive_form_counts():
    p = generate_instance(GeneratorParams("sslp_like", 2, 3, 4, seed=0))
    ef = build_extensive_form(p)
    assert ef.n == p.n_x + p.n_scenarios * p.n_y
    assert ef.m == len(p.first_stage_rows) + sum(len(sc.rows) for sc in p.scenarios)


def test_single_scenario_extensive_form_is_deterministic_milp():
    p = tiny_program(np.random.default_rng(0), S=1)
    ef = build_extensive_form(p)
    np.testing.assert_array_equal(ef.c, np.concatenate([p.cost, p.q_matrix[0]]))


@pytest.mark.parametrize("seed", range(10))
def test_exact_matches_enumeration(seed):
    p = tiny_program(np.random.default_rng(seed), S=2)
    ref, _ = enumerate_exact(p)
    ex = solve_exact(p)
    assert ex.status == "optimal"
    assert ex.objective == pytest.approx(ref, abs=1e-7)
    assert len(ex.y) == 2


@pytest.mark.parametrize("seed", range(8))
def test_split_form_equivalent(seed):
    p = tiny_program(np.random.default_rng(40 + seed))
    ef = solve_milp(build_extensive_form(p)).objective
    split = solve_milp(build_split_form(p)).objective
    assert split == pytest.approx(ef, abs=1e-8)
    assert solve_lp(build_split_form(p, relax=True)).objective == pytest.approx(
        highs(build_extensive_form(p), relax=True)[1], abs=1e-7)


@pytest.mark.parametrize("seed", range(8))
def test_lp_multipliers_give_lp_bound(seed):
    p = tiny_program(np.random.default_rng(80 + seed))
    omega, lp_val = lp_nac_multipliers(p)
    assert np.max(np.abs(p.probs @ omega)) <= 1e-7
    lp_ref = highs(build_extensive_form(p), relax=True)[1]
    assert lp_val == pytest.approx(lp_ref, abs=1e-7)
    assert lagrangian_bound(p, omega, relax=True) == pytest.approx(lp_ref, abs=1e-6)
    assert lagrangian_bound(p, omega) <= solve_exact(p).objective + 1e-7


def test_identical_scenarios_zero_multipliers():
    p = tiny_program(np.random.default_rng(3), S=3, identical=True)
    omega, lp_val = lp_nac_multipliers(p)
    # any optimal multiplier is feasible; zero is optimal by symmetry
    assert lagrangian_bound(p, np.zeros_like(omega), relax=True) == pytest.approx(lp_val, abs=1e-9)


def test_single_scenario_multipliers_vanish():
    p = tiny_program(np.random.default_rng(5), S=1)
    omega, _ = lp_nac_multipliers(p)
    np.testing.assert_allclose(omega, 0.0, atol=1e-9)


def test_lagrangian_bound_weak_duality_and_errors():
    rng = np.random.default_rng(6)
    for _ in range(5):
        p = tiny_program(rng, S=3)
        zs = solve_exact(p).objective
        assert lagrangian_bound(p, np.zeros((3, p.n_x))) <= zs + 1e-9
        raw = rng.normal(size=(3, p.n_x))
        omega = raw - p.probs @ raw  # project onto sum p_s omega_s = 0
        assert lagrangian_bound(p, omega) <= zs + 1e-7
    with pytest.raises(ValueError, match="dual feasible"):
        lagrangian_bound(p, np.ones((3, p.n_x)))


def test_wait_and_see_on_conflict():
    p = conflict_program()
    assert solve_exact(p).objective == pytest.approx(5.0)
    assert lagrangian_bound(p, np.zeros((2, 1))) == pytest.approx(0.0)


def test_augmented_dual_small_and_large_weights():
    rng = np.random.default_rng(7)
    for _ in range(5):
        p = tiny_program(rng, S=3)
        zero = np.zeros((3, p.n_x))
        assert augmented_dual_value(p, zero, 1e-9) == pytest.approx(lagrangian_bound(p, zero), abs=1e-5)
        assert augmented_dual_value(p, zero, 1e4) == pytest.approx(solve_exact(p).objective, abs=1e-6)


def test_augmented_dual_fixed_first_stage():
    p = tiny_program(np.random.default_rng(8), n_x=2, S=2)
    fixed = StochasticProgram(p.name, 2, p.n_y, p.c, (VarSpec(1.0, 1.0, "bin"), VarSpec(0.0, 0.0, "bin")), (),
                              p.scenarios)
    zs = solve_exact(fixed).objective
    for rho in (0.01, 1.0, 100.0):
        assert augmented_dual_value(fixed, np.zeros((2, 2)), rho) == pytest.approx(zs)


def test_augmented_dual_rejects_bad_inputs():
    p = conflict_program()
    with pytest.raises(ValueError):
        augmented_dual_value(p, np.ones((2, 1)), 1.0)
    with pytest.raises(ValueError):
        augmented_dual_value(p, np.zeros((2, 1)), 0.0)


def test_threshold_none_on_tiny_grid():
    study = find_exactness_threshold(conflict_program(), rho_grid=[0.001])
    assert study.threshold is None
    assert study.values[0] < study.zeta_sip


def test_threshold_conflict_by_hand():
    # z = x0 costs rho in one scenario at probability weight 1: value min(5, rho)
    study = find_exactness_threshold(conflict_program(), rho_grid=[1.0, 2.0, 4.0, 8.0])
    assert study.values == pytest.approx([1.0, 2.0, 4.0, 5.0])
    assert study.threshold == 8.0
    assert study.monotone and study.bounded


def test_threshold_identical_scenarios_smallest_point():
    p = tiny_program(np.random.default_rng(9), S=3, identical=True)
    study = find_exactness_threshold(p, rho_grid=[0.5, 1.0, 2.0])
    assert study.threshold == 0.5


@pytest.mark.parametrize("seed", range(6))
def test_threshold_found_on_random_instances(seed):
    p = tiny_program(np.random.default_rng(500 + seed))
    study = find_exactness_threshold(p)
    assert study.threshold is not None
    assert study.monotone and study.bounded
    assert study.zeta_sip == pytest.approx(enumerate_exact(p)[0], abs=1e-7)


def test_threshold_grid_validation():
    with pytest.raises(ValueError):
        find_exactness_threshold(conflict_program(), rho_grid=[2.0, 1.0])
    with pytest.raises(ValueError):
        find_exactness_threshold(conflict_program(), rho_grid=[0.0, 1.0])


def test_monotone_in_componentwise_weights():
    p = tiny_program(np.random.default_rng(10), n_x=3, S=2)
    rng = np.random.default_rng(11)
    zero = np.zeros((2, 3))
    lo = rng.uniform(0.1, 2, (2, 3))
    hi = rng.uniform(0.1, 2, (2, 3))
    prev = -np.inf
    for scale in (0.5, 1.0, 2.0, 4.0):
        v = augmented_dual_value(p, zero, scale * lo, scale * hi)
        assert v >= prev - 1e-9
        prev = v
    for idx in itertools.product(range(2), range(3)):
        bumped = lo.copy()
        bumped[idx] += 1.0
        assert augmented_dual_value(p, zero, bumped, hi) >= augmented_dual_value(p, zero, lo, hi) - 1e-9
