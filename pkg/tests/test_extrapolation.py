import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layerpot.errors import PositivityViolated, SingularSystem
from layerpot.extrapolation import (COMPANION_RELATIONS, I0, I2, I4, ExtrapolationPlan,
                                    I_quad, companion_relations_check, determinant,
                                    determinant_at_zero, determinant_positivity_check,
                                    extrapolate, solve_weights, solve_weights_batch, system_matrix)

LAMS = np.arange(0.0, 5.0 + 1e-9, 0.25)


def test_weights_at_zero_distance():
    w = solve_weights(ExtrapolationPlan(), 0.0, 0.1)
    assert np.allclose(w.a, [14 / 3, -16 / 3, 5 / 3], atol=1e-12, rtol=0)
    assert not w.degenerate_far


def test_seventh_order_weights_at_zero_distance():
    w = solve_weights(ExtrapolationPlan(rhos=(2, 3, 4, 5), order=7), 0.0, 0.1)
    assert np.allclose(w.a, [6, -9, 5, -1], atol=1e-11, rtol=0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.5, 3), st.floats(0.1, 2), st.floats(0.1, 2), st.floats(-1, 1), st.floats(1e-3, 0.1))
def test_weights_sum_to_one(r1, d1, d2, bh, h):
    plan = ExtrapolationPlan(rhos=(r1, r1 + d1, r1 + d1 + d2))
    a, _, _ = solve_weights_batch(plan, [bh * h], h)
    assert abs(a[0].sum() - 1.0) < 1e-12


def test_weights_remove_synthetic_error_terms():
    plan = ExtrapolationPlan()
    h = 0.02
    for b in (-0.03, -0.01, 0.0, 0.005, 0.04):
        w = solve_weights(plan, b, h)
        rho = np.array(plan.rhos)
        lam = b / (rho * h)
        vals = 0.7 + 3.0 * rho * h * I0(lam) - 11.0 * (rho * h) ** 3 * I2(lam)
        assert extrapolate(vals, w) == pytest.approx(0.7, abs=1e-12)


def test_far_targets_use_plain_sum():
    plan = ExtrapolationPlan()
    w = solve_weights(plan, 20 * 0.01, 0.01)
    assert w.degenerate_far and np.array_equal(w.a, [1.0, 0.0, 0.0])
    # without the cutoff the weights approach (1, 0, 0) anyway
    w2 = solve_weights(ExtrapolationPlan(far_cutoff=np.inf), 20 * 0.01, 0.01)
    assert np.allclose(w2.a, [1, 0, 0], atol=1e-6)


def test_fractional_delta_rule():
    plan = ExtrapolationPlan(q=0.8)
    assert np.allclose(plan.deltas(1 / 64), np.array([2, 3, 4]) / 64)
    assert np.allclose(plan.deltas(1 / 32), np.array([2, 3, 4]) * (1 / 32) ** 0.8 * (1 / 64) ** 0.2)
    assert plan.describe_rule().startswith("fractional(q=0.8")
    assert ExtrapolationPlan().describe_rule() == "proportional"


@pytest.mark.parametrize("kw", [dict(rhos=(3, 2, 4)), dict(rhos=(2, 3)), dict(order=6),
                                dict(order=7), dict(q=0.0), dict(q=1.5), dict(rhos=(0, 1, 2))])
def test_plan_validation(kw):
    with pytest.raises(ValueError):
        ExtrapolationPlan(**kw)


def test_nearly_equal_rhos_are_singular():
    plan = ExtrapolationPlan(rhos=(2.0, 2.0 + 1e-14, 3.0))
    with pytest.raises(SingularSystem):
        solve_weights(plan, 0.0, 0.01)


@pytest.mark.parametrize("n, fn", [(0, I0), (2, I2), (4, I4)])
def test_closed_forms_against_quadrature(n, fn):
    for lam in LAMS:
        assert abs(fn(lam) - I_quad(n, lam)) <= 1e-10, (n, lam)


def test_even_in_lambda():
    lam = np.linspace(0, 4, 9)
    for fn in (I0, I2, I4):
        assert np.array_equal(fn(lam), fn(-lam))


def test_I2_identity():
    x = LAMS
    rhs = -2 / 3 * x**2 * I0(x) + np.exp(-x**2) / (3 * math.sqrt(math.pi))
    assert np.max(np.abs(I2(x) - rhs)) <= 1e-14


def test_companion_relations_sample():
    rows = companion_relations_check(lams=[0.0, 0.7, 2.5])
    assert len(rows) == 3 * len(COMPANION_RELATIONS)


def test_determinant_closed_form_at_zero():
    for rhos in [(2, 3, 4), (3, 4, 5), (1, 2, 5)]:
        assert determinant(rhos, [0.0])[0] == pytest.approx(determinant_at_zero(rhos), abs=1e-12)
    assert determinant_at_zero((2, 3, 4)) == pytest.approx(6 / math.pi)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.3, 3), st.floats(0.2, 2), st.floats(0.2, 2))
def test_determinant_positive(r1, d1, d2):
    rhos = (r1, r1 + d1, r1 + d1 + d2)
    assert np.all(determinant(rhos, np.linspace(0, 6, 61)) > 0)


def test_positivity_check_reports():
    rep = determinant_positivity_check((2, 3, 4), np.linspace(0, 10, 101))
    assert rep["min_D"] > 0
    with pytest.raises(PositivityViolated):
        determinant_positivity_check((3, 2, 4), np.linspace(0, 1, 5))


def test_system_matrix_shape():
    M = system_matrix((2, 3, 4, 5), np.zeros((7, 4)))
    assert M.shape == (7, 4, 4)
    assert np.allclose(M[0, :, 1], np.array([2, 3, 4, 5]) / math.sqrt(math.pi))


def test_integral_anchor_values():
    assert I0(0.0) == pytest.approx(1 / math.sqrt(math.pi))
    assert I2(0.0) == pytest.approx(1 / (3 * math.sqrt(math.pi)))
    assert I4(3.0) < 1e-4
    assert abs(I0(1.3) - I_quad(0, 1.3)) < 1e-10
    lam = np.linspace(0, 5, 51)
    for fn in (I0, I2, I4):
        v = fn(lam)
        assert np.all(v > 0) and np.all(np.diff(v) < 0)


def test_extrapolate_simple_cases():
    assert extrapolate([2.5, 2.5, 2.5], solve_weights(ExtrapolationPlan(), 0.013, 0.01)) == pytest.approx(2.5)
    assert extrapolate([1.0, 7.0, 9.0], np.array([1.0, 0, 0])) == 1.0
    v = np.array([1.1, 1.3, 1.7])
    w = solve_weights(ExtrapolationPlan(), 0.0, 0.01)
    assert extrapolate(v, w) == pytest.approx((14 * v[0] - 16 * v[1] + 5 * v[2]) / 3, rel=1e-13)


def test_determinant_closed_form_123():
    assert determinant_at_zero((1, 2, 3)) == pytest.approx(4 / math.pi)


def test_underflowed_rows_near_cutoff_still_give_weights():
    # lambda_1 ~ 48: the two smallest-delta rows are both (1, 0, 0) in floating point
    plan = ExtrapolationPlan(rhos=(0.5, 0.6, 6.0))
    h = 0.01
    b = np.array([-3.99, -2.5, 2.5, 3.99]) * 6.0 * h
    a, _, far = solve_weights_batch(plan, b, h)
    assert not far.any()
    assert np.all(np.isfinite(a))
    assert np.allclose(a.sum(axis=1), 1.0, atol=1e-12, rtol=0)
