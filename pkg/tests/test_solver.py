import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import WALKTHROUGH_BUDGET, random_budget, random_curves
from phasebudget import (
    Objective,
    PhaseCurve,
    ResourceLimitError,
    SolveConfig,
    SolverError,
    ValidationError,
    evaluate,
    grid_oracle,
    reallocate,
    solve,
    solve_log_transformed,
    total_response,
)
from phasebudget.objectives import marginal
from phasebudget.solver import _compositions, grid_gap_bound

ADD = Objective.additive()
MULT = Objective.mult_offset()

# walkthrough figures, rounded to the printed precision
ADDITIVE_FIXTURE = (0.001150, 0.001420, 0.002537, 0.012844)
MULT_FIXTURE = (0.001134, 0.001399, 0.002499, 0.012919)


def test_walkthrough_additive(walkthrough_curves):
    alloc = solve(walkthrough_curves, ADD, SolveConfig(WALKTHROUGH_BUDGET))
    np.testing.assert_allclose(alloc.amounts, ADDITIVE_FIXTURE, atol=2e-5)
    assert abs(alloc.amounts.sum() - WALKTHROUGH_BUDGET) <= 1e-9
    assert alloc.labels == ("plan", "decompose", "implement", "refine")
    assert alloc.lambda_star > 0


def test_walkthrough_mult_offset(walkthrough_curves):
    alloc = solve(walkthrough_curves, MULT, SolveConfig(WALKTHROUGH_BUDGET))
    np.testing.assert_allclose(alloc.amounts, MULT_FIXTURE, atol=2e-5)
    assert alloc.objective_value == pytest.approx(
        evaluate(walkthrough_curves, alloc.amounts, MULT), rel=1e-15
    )


def test_product_objective_shifts_budget_to_low_ceiling_phase(walkthrough_curves):
    add = solve(walkthrough_curves, ADD, SolveConfig(WALKTHROUGH_BUDGET)).amounts
    mult = solve(walkthrough_curves, MULT, SolveConfig(WALKTHROUGH_BUDGET)).amounts
    assert mult[3] > add[3]


def test_allocation_is_read_only(walkthrough_curves):
    alloc = solve(walkthrough_curves, ADD, SolveConfig(WALKTHROUGH_BUDGET))
    with pytest.raises(ValueError):
        alloc.amounts[0] = 1.0
    assert alloc.fractions().sum() == pytest.approx(1.0)
    assert set(alloc.as_dict()["amounts"]) == {"plan", "decompose", "implement", "refine"}


def test_kkt_conditions(rng):
    for _ in range(50):
        curves = random_curves(rng, 4)
        budget = random_budget(rng, curves)
        for obj in (ADD, MULT, Objective.ceiling_weighted(curves)):
            alloc = solve(curves, obj, SolveConfig(budget))
            lam = alloc.lambda_star
            w = obj.weight_vector(4)
            for c, x, wi in zip(curves, alloc.amounts, w):
                m = marginal(c, x, obj, wi if obj.weights else 1.0)
                if x > 1e-9 * budget:
                    assert abs(m - lam) <= 1e-6 * lam
                else:
                    assert m <= lam * (1 + 1e-6)


def test_budget_conservation_and_nonnegativity(rng):
    for _ in range(100):
        n = int(rng.integers(1, 8))
        curves = random_curves(rng, n)
        budget = random_budget(rng, curves)
        for obj in (ADD, MULT):
            alloc = solve(curves, obj, SolveConfig(budget))
            assert np.all(alloc.amounts >= 0)
            assert abs(alloc.amounts.sum() - budget) <= 1e-9 * budget


def test_single_phase_gets_everything():
    alloc = solve([PhaseCurve(0.5, 3.0)], ADD, SolveConfig(2.0))
    assert alloc.amounts.tolist() == [2.0]


def test_identical_phases_split_evenly():
    curves = [PhaseCurve(0.6, 40.0)] * 3
    alloc = solve(curves, MULT, SolveConfig(0.3))
    np.testing.assert_allclose(alloc.amounts, [0.1, 0.1, 0.1], rtol=1e-9)


def test_unit_ceiling_is_never_starved():
    curves = [PhaseCurve(1.0, 1.0), PhaseCurve(0.2, 1e4)]
    alloc = solve(curves, MULT, SolveConfig(1e-3))
    assert alloc.amounts[0] > 0


def test_all_unit_ceilings():
    curves = [PhaseCurve(1.0, 10.0), PhaseCurve(1.0, 30.0)]
    alloc = solve(curves, MULT, SolveConfig(0.5))
    assert alloc.amounts.sum() == pytest.approx(0.5, abs=1e-12)
    assert np.all(alloc.amounts > 0)


def test_caps_bind_and_excess_is_returned():
    curves = [PhaseCurve(0.9, 100.0), PhaseCurve(0.2, 1.0)]
    alloc = solve(curves, ADD, SolveConfig(1.0, caps=(0.01, 2.0)))
    assert alloc.amounts[0] == 0.01
    assert alloc.amounts.sum() == pytest.approx(1.0, abs=1e-9)


def test_caps_below_budget_hand_out_caps():
    curves = [PhaseCurve(0.9, 100.0), PhaseCurve(0.2, 1.0)]
    alloc = solve(curves, ADD, SolveConfig(1.0, caps=(0.1, 0.2)))
    assert alloc.amounts.tolist() == [0.1, 0.2]
    assert alloc.lambda_star == 0.0


def test_cap_length_mismatch():
    with pytest.raises(ValidationError):
        solve([PhaseCurve(0.5, 1.0)], ADD, SolveConfig(1.0, caps=(1.0, 1.0)))


def test_invalid_inputs():
    with pytest.raises(ValidationError):
        SolveConfig(0.0)
    with pytest.raises(ValidationError):
        SolveConfig(1.0, tolerance=-1.0)
    with pytest.raises(ValidationError):
        solve([], ADD, SolveConfig(1.0))
    with pytest.raises(ValidationError):
        solve([PhaseCurve(0.5, 1.0)] * 2, Objective.prop_offset([1.0]), SolveConfig(1.0))


def test_iteration_limit_raises_with_bracket(rng):
    curves = random_curves(rng, 4)
    with pytest.raises(SolverError) as info:
        solve(curves, ADD, SolveConfig(random_budget(rng, curves), max_iterations=2))
    lo, hi = info.value.bracket
    assert 0 < lo < hi


def test_total_response_matches_solution(walkthrough_curves):
    alloc = solve(walkthrough_curves, ADD, SolveConfig(WALKTHROUGH_BUDGET))
    assert total_response(walkthrough_curves, alloc.lambda_star, ADD) == pytest.approx(
        WALKTHROUGH_BUDGET, rel=1e-8
    )


@settings(max_examples=60, deadline=None)
@given(
    a=st.lists(st.floats(0.05, 0.95), min_size=2, max_size=5),
    log_b=st.floats(1.0, 3.5),
    scale=st.floats(1e-2, 1e2),
)
def test_currency_rescaling_scales_allocation(a, log_b, scale):
    b = 10 ** log_b
    curves = [PhaseCurve(ai, b * (1 + i)) for i, ai in enumerate(a)]
    rescaled = [PhaseCurve(c.ceiling_a, c.rate_b / scale) for c in curves]
    budget = 3.0 / b
    x = solve(curves, MULT, SolveConfig(budget)).amounts
    y = solve(rescaled, MULT, SolveConfig(budget * scale)).amounts
    np.testing.assert_allclose(y, x * scale, rtol=1e-6, atol=1e-8 * budget * scale)


def test_quality_monotone_in_budget(rng):
    curves = random_curves(rng, 4)
    budgets = np.geomspace(1e-4, 1.0, 25)
    for obj in (ADD, MULT):
        values = [solve(curves, obj, SolveConfig(float(B))).objective_value for B in budgets]
        assert all(v2 >= v1 - 1e-12 for v1, v2 in zip(values, values[1:]))


def test_compositions_enumerate_simplex():
    rows = _compositions(4, 3)
    assert rows.shape == (math.comb(6, 2), 3)
    assert np.all(rows.sum(axis=1) == 4)
    assert len({tuple(r) for r in rows}) == len(rows)


def test_grid_oracle_is_below_solver(walkthrough_curves):
    config = SolveConfig(WALKTHROUGH_BUDGET)
    for obj in (ADD, MULT):
        exact = solve(walkthrough_curves, obj, config).objective_value
        grid = grid_oracle(walkthrough_curves, obj, config, 61).objective_value
        assert grid <= exact + 1e-12
        assert exact - grid <= grid_gap_bound(walkthrough_curves, obj, WALKTHROUGH_BUDGET, 61)


def test_grid_oracle_size_limit(walkthrough_curves):
    with pytest.raises(ResourceLimitError):
        grid_oracle(walkthrough_curves, ADD, SolveConfig(1.0), 1001, max_grid_size=10_000)


def test_log_transformed_route_agrees(walkthrough_curves):
    config = SolveConfig(WALKTHROUGH_BUDGET)
    direct = solve(walkthrough_curves, MULT, config).amounts
    logged = solve_log_transformed(walkthrough_curves, config).amounts
    np.testing.assert_allclose(logged, direct, atol=10 * config.budget_tolerance)


def test_reallocate_uses_leftover(walkthrough_curves):
    tail = walkthrough_curves[2:]
    alloc = reallocate(tail, ADD, spent=0.005, total_B=WALKTHROUGH_BUDGET)
    assert alloc.amounts.sum() == pytest.approx(WALKTHROUGH_BUDGET - 0.005, abs=1e-12)
    done = reallocate(tail, ADD, spent=WALKTHROUGH_BUDGET, total_B=WALKTHROUGH_BUDGET)
    assert done.amounts.tolist() == [0.0, 0.0]
    with pytest.raises(ValidationError):
        reallocate(tail, ADD, spent=1.0, total_B=WALKTHROUGH_BUDGET)
    with pytest.raises(ValidationError):
        reallocate(tail, ADD, spent=-1e-3, total_B=WALKTHROUGH_BUDGET)


def test_equal_ceilings_make_prop_offset_match_mult_offset(rng):
    # constant weights rescale the price but leave the argmax alone
    for _ in range(30):
        n = int(rng.integers(2, 6))
        a = float(rng.uniform(0.1, 0.9))
        curves = [PhaseCurve(a, c.rate_b) for c in random_curves(rng, n)]
        config = SolveConfig(random_budget(rng, curves))
        prop = solve(curves, Objective.ceiling_weighted(curves), config).amounts
        mult = solve(curves, MULT, config).amounts
        np.testing.assert_allclose(prop, mult, atol=10 * config.budget_tolerance)
