import math

import numpy as np
import pytest
from scipy.optimize import linprog

from esr_bell.esr_core import max_uniform_eta, modified_bchsh_lhs, quantum_expectations
from esr_bell.qtheory import product_state
from esr_bell.synthesis import (FeasibilityProblem, build_lp, search_eta_threshold,
                                solve_feasibility, solve_problem, target_table, verify_solution)

TWO_SQRT2 = 2 * math.sqrt(2)


def highs_feasible(system):
    res = linprog(np.zeros(256), A_eq=system.A_raw, b_eq=system.b_raw, bounds=(0, None),
                  method="highs")
    return res.status == 0


def test_constraint_counts(singlet, canonical):
    system = build_lp(FeasibilityProblem.uniform(singlet, canonical, 0.8))
    assert system.A_raw.shape == (37, 256)
    assert len(system.labels) == 37
    assert len(system.kept) == 25  # 2-setting, 3-outcome no-signalling dimension + 1


def test_targets_eta_one_forbid_no_registration(singlet, canonical):
    t = target_table(FeasibilityProblem.uniform(singlet, canonical, 1.0))
    assert np.all(t[:, 1, :] == 0) and np.all(t[:, :, 1] == 0)


def test_targets_eta_zero(singlet, canonical):
    t = target_table(FeasibilityProblem(singlet, canonical, 0.0, 0.7))
    assert np.all(t[:, [0, 2]][:, :, [0, 2]] == 0)
    np.testing.assert_allclose(t.sum(axis=(1, 2)), 1, atol=1e-12)


def test_eta_one_forces_full_detection():
    # at eta = 1 any support must carry detection bits 1; use the product state
    p = FeasibilityProblem.uniform(product_state(), (0, 1, 2, 3), 1.0)
    res = solve_problem(p)
    assert res.feasible
    assert np.all(res.ensemble.detection == 1)


@pytest.mark.parametrize("eta", [1.0, 0.95])
def test_bell_infeasible(singlet, canonical, eta):
    system = build_lp(FeasibilityProblem.uniform(singlet, canonical, eta))
    res = solve_feasibility(system)
    assert res.status == "infeasible"
    y = res.certificate
    assert np.all(y @ system.A_raw <= 1e-9)
    assert y @ system.b_raw > 1e-9
    assert modified_bchsh_lhs([eta] * 4, quantum_expectations(singlet, canonical)) > 2


def test_detection_loophole_feasible(solved):
    p, res = solved(0.5)
    assert res.feasible and res.residual <= 1e-9
    rep = verify_solution(res, p)
    assert rep.ok and rep.max_deviation <= 1e-8
    assert rep.conditional_chsh == pytest.approx(TWO_SQRT2, abs=1e-6)
    assert rep.standard_bchsh_micro <= 2 + 1e-9
    assert rep.modified_bchsh <= 2 + 1e-9


def test_product_state_feasible_at_one():
    p = FeasibilityProblem.uniform(product_state(), (0.3, 1.1, 2.0, 4.0), 1.0)
    assert solve_problem(p).feasible


def test_verify_at_point_eight(solved):
    p, res = solved(0.8)
    rep = verify_solution(res, p)
    assert rep.max_deviation <= 1e-8
    assert rep.standard_bchsh_micro <= 2
    assert rep.conditional_chsh == pytest.approx(TWO_SQRT2, abs=1e-6)
    assert rep.modified_bchsh == pytest.approx(0.64 * TWO_SQRT2, abs=1e-6)
    assert rep.to_dict()["bchsh_modified"] == pytest.approx(1.8101933598, abs=1e-9)


def test_verify_detects_tampering(solved):
    p, res = solved(0.5)
    other = FeasibilityProblem.uniform(p.state, p.settings, 0.6)
    assert not verify_solution(res, other).ok


def test_verify_rejects_infeasible(singlet, canonical):
    p = FeasibilityProblem.uniform(singlet, canonical, 1.0)
    with pytest.raises(ValueError):
        verify_solution(solve_problem(p), p)


@pytest.mark.parametrize("eta", np.round(np.arange(0.05, 1.0001, 0.05), 2))
def test_grid_consistency(singlet, canonical, eta):
    system = build_lp(FeasibilityProblem.uniform(singlet, canonical, eta))
    res = solve_feasibility(system)
    assert res.feasible == highs_feasible(system)
    if modified_bchsh_lhs([eta] * 4, quantum_expectations(singlet, canonical)) > 2:
        assert not res.feasible
    if res.feasible:
        assert verify_solution(res, system.problem).max_deviation <= 1e-8
    else:
        assert res.certificate_holds(system, 1e-9)


def test_monotone_in_eta(solved):
    p, res = solved(0.8)
    assert res.feasible
    for eta in (0.2, 0.5, 0.75):
        assert solved(eta)[1].feasible


def test_random_settings_against_highs(singlet, rng):
    for _ in range(15):
        angles = rng.uniform(0, 2 * math.pi, 4)
        eta = rng.uniform(0.6, 1.0)
        system = build_lp(FeasibilityProblem.uniform(singlet, angles, eta))
        assert solve_feasibility(system).feasible == highs_feasible(system)


def test_threshold_search(singlet, canonical):
    search = search_eta_threshold(singlet, canonical)
    assert search.solves <= 20
    assert search.upper - search.lower <= 1e-6
    assert search.eta <= max_uniform_eta(quantum_expectations(singlet, canonical)) + 1e-6
    # independent oracle: bisection on the HiGHS verdict over the same raw system
    lo, hi = 0.0, 1.0
    for _ in range(20):
        mid = (lo + hi) / 2
        if highs_feasible(build_lp(FeasibilityProblem.uniform(singlet, canonical, mid))):
            lo = mid
        else:
            hi = mid
    assert search.eta == pytest.approx(hi, abs=2e-6)


def test_threshold_product_state():
    assert search_eta_threshold(product_state(), (0, 1, 2, 3)).eta == 1.0


def test_feasibility_problem_validation(singlet, canonical):
    with pytest.raises(ValueError):
        FeasibilityProblem.uniform(singlet, canonical, 1.2)
    with pytest.raises(ValueError):
        FeasibilityProblem.uniform(singlet, canonical[:3], 0.5)
