import math

import numpy as np
import pytest

from singmix import (
    ExponentField,
    boundary_strip,
    build_grid,
    compute_p_condition,
    eval_delta,
    regularity_exponents,
)
from singmix.estimates import stampacchia_alpha
from singmix.exponents import sobolev_exponent

from conftest import UNIT_DISC


def test_eval_constant():
    fld = ExponentField.constant(0.5)
    assert eval_delta(fld, (0.3, 0.3)) == 0.5


def test_eval_nodal_formula():
    fld = ExponentField.from_formula("1 + rho*rho")
    assert eval_delta(fld, (0.0, 0.0)) == pytest.approx(1.0)
    assert eval_delta(fld, (0.6, 0.8)) == pytest.approx(2.0)


def test_p_condition_constant_below_one():
    g = build_grid(UNIT_DISC, 1 / 8)
    cond = compute_p_condition(ExponentField.constant(0.5), g, 0.2)
    assert cond.delta_star == 1.0


def test_p_condition_constant_above_one():
    g = build_grid(UNIT_DISC, 1 / 8)
    cond = compute_p_condition(ExponentField.constant(3.0), g, 0.2)
    assert cond.delta_star == 3.0


def test_p_condition_formula_matches_strip_oracle():
    g = build_grid(UNIT_DISC, 1 / 16)
    fld = ExponentField.from_formula("1 + rho*rho")
    cond = compute_p_condition(fld, g, 0.2)
    # oracle: direct maximum over the strip nodes
    mask = boundary_strip(g, 0.2)
    expected = max(1.0, float(np.max(1 + np.sum(g.nodes[mask] ** 2, axis=1))))
    assert cond.delta_star == pytest.approx(expected)
    assert cond.strip_node_count == int(mask.sum())


def test_p_condition_monotone_in_eps():
    g = build_grid(UNIT_DISC, 1 / 16)
    fld = ExponentField.from_formula("1 + rho*rho")
    stars = [compute_p_condition(fld, g, e).delta_star for e in (0.1, 0.2, 0.4, 0.9)]
    assert stars == sorted(stars)


def test_p_condition_empty_strip_errors():
    g = build_grid(UNIT_DISC, 1 / 8)
    with pytest.raises(ValueError):
        compute_p_condition(ExponentField.constant(1.0), g, 1e-6)


def test_table_constant_high_case_ii():
    rep = regularity_exponents(N=3, r=2.0, m=1.2, delta=1.0)
    assert rep.case_id == "T4.ii"
    assert rep.exponent == pytest.approx(6.0)  # 3*1.2/(3-2.4)


def test_energy_exponent_below_one():
    assert sobolev_exponent(3, 0.5) == pytest.approx(1.8)
    assert sobolev_exponent(3, 1.7) == 2.0


def test_table_variable_case_iii():
    # threshold N(ds+1)/(N+2ds) = 1.2 at ds = 1
    rep = regularity_exponents(N=3, r=1.2, m=2.0, delta_star=1.0)
    assert rep.case_id == "T7.iii"
    assert rep.exponent == pytest.approx(6.0)  # 3*1.2/(3-2.4)


def test_table_variable_below_threshold_no_prediction():
    rep = regularity_exponents(N=3, r=1.1, m=2.0, delta_star=1.0)
    assert not rep.prediction
    assert rep.case_id == "none"


def test_table_low_delta_threshold():
    # conjugate of 2*/(1-delta): N=3, delta=0.5 -> (12)' = 12/11
    rep = regularity_exponents(N=3, r=12 / 11, m=2.0, delta=0.5)
    assert rep.case_id == "T6.iii"
    below = regularity_exponents(N=3, r=1.05, m=2.0, delta=0.5)
    assert not below.prediction


def test_case_i_with_unbounded_m():
    rep = regularity_exponents(N=3, r=2.0, m=math.inf, delta=2.0)
    assert rep.case_id == "T4.i"
    assert rep.space == "Linf"


def test_case_iv_takes_minimum():
    rep = regularity_exponents(N=3, r=1.2, m=1.2, delta=1.0)
    assert rep.case_id == "T4.iv"
    m_star2 = 3 * 1.2 / (3 - 2.4)
    q_sing = 3 * 1.2 * 2 / (3 - 2.4)
    assert rep.exponent == pytest.approx(min(m_star2, q_sing))


def test_boundary_values_excluded():
    assert not regularity_exponents(N=3, r=1.5, m=2.0, delta=1.0).prediction
    assert not regularity_exponents(N=3, r=2.0, m=1.0, delta=1.0).prediction


def test_n2_only_bounded_case():
    assert regularity_exponents(N=2, r=2.0, m=3.0, delta=1.0).case_id == "T4.i"
    # r at the N/2 boundary falls outside every case in two dimensions
    assert not regularity_exponents(N=2, r=1.0, m=3.0, delta=1.0).prediction


def test_continuity_within_case():
    base = regularity_exponents(N=3, r=2.0, m=1.2, delta=1.0)
    for dr, dm in ((1e-6, 0.0), (0.0, 1e-6), (1e-6, -1e-6)):
        rep = regularity_exponents(N=3, r=2.0 + dr, m=1.2 + dm, delta=1.0)
        assert rep.case_id == base.case_id
        assert rep.exponent == pytest.approx(base.exponent, rel=1e-4)


def test_argument_validation():
    with pytest.raises(ValueError):
        regularity_exponents(N=3, r=2.0, m=2.0)
    with pytest.raises(ValueError):
        regularity_exponents(N=3, r=2.0, m=2.0, delta=1.0, delta_star=1.0)
    with pytest.raises(ValueError):
        regularity_exponents(N=3, r=0.5, m=2.0, delta=1.0)


def test_stampacchia_alpha_arithmetic():
    assert stampacchia_alpha(3, 2.0) == pytest.approx(2.0)
    assert stampacchia_alpha(2, 2.0) is None


def test_report_serializes():
    rep = regularity_exponents(N=3, r=1.2, m=2.0, delta_star=1.0)
    d = rep.to_json_dict()
    assert d["case_id"] == "T7.iii"
    assert d["params"]["r"] == 1.2
