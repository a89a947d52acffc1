import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subexp.ambiguity import FAIR_COIN, AmbiguitySet, FiniteDistribution, random_ambiguity_set
from subexp.choquet import (
    CapacityCurve,
    MomentQuery,
    ParetoCurve,
    StepCurve,
    choquet_expectation,
    choquet_moment,
    finiteness_classify,
    lemma1_check,
)
from subexp.errors import ContractError


def test_indicator_and_fair_coin():
    assert choquet_expectation(StepCurve.indicator(0.3)).value == pytest.approx(0.3)
    assert choquet_expectation(StepCurve.from_ambiguity(AmbiguitySet.of(FAIR_COIN))).value == pytest.approx(1.0)


def test_point_mass_with_log_factor():
    curve = StepCurve.from_ambiguity(AmbiguitySet.of(FiniteDistribution.point_mass(2.0)))
    assert choquet_moment(curve, MomentQuery(3, True)).value == pytest.approx(8 * math.log(3))


def test_pareto_closed_forms():
    # C(|X|^q) = a s^q / (a - q) for q < a
    assert choquet_moment(ParetoCurve(2.0), MomentQuery(1)).value == pytest.approx(2.0, rel=1e-9)
    assert choquet_moment(ParetoCurve(2.5), MomentQuery(2)).value == pytest.approx(5.0, rel=1e-9)
    assert choquet_moment(ParetoCurve(3.0, 2.0), MomentQuery(1)).value == pytest.approx(3.0, rel=1e-9)


def test_truncated_pareto_closed_form():
    # c >= s: C(|X|^q I(|X| > c)) = a c^(q - a) s^a / (a - q)
    val = choquet_moment(ParetoCurve(3.0), MomentQuery(1, c=4.0)).value
    assert val == pytest.approx(3 * 4.0**-2 / 2, rel=1e-9)


def test_divergence_verdicts():
    heavy = choquet_moment(ParetoCurve(2.5), MomentQuery(3))
    assert heavy.divergent and heavy.value > 1e6 and float(heavy) == math.inf
    assert choquet_moment(ParetoCurve(2.0), MomentQuery(2)).divergent
    assert choquet_moment(ParetoCurve(2.0), MomentQuery(2, True)).divergent
    assert choquet_moment(ParetoCurve(3.0), MomentQuery(2, True)).finite


def test_finiteness_classify():
    assert finiteness_classify(ParetoCurve(3), MomentQuery(2)) == "finite"
    assert finiteness_classify(ParetoCurve(2), MomentQuery(2)) == "divergent"
    assert finiteness_classify(ParetoCurve(3), MomentQuery(2, True)) == "finite"
    with pytest.raises(ContractError):
        finiteness_classify(StepCurve.indicator(0.5), MomentQuery(1))


def test_curve_json_round_trip():
    for curve in (ParetoCurve(2.5, 1.5), StepCurve.from_points([[0, 1], [1, 0.5], [3, 0]])):
        assert CapacityCurve.from_json(curve.to_json()) == curve
    amb = AmbiguitySet.of(FAIR_COIN)
    again = CapacityCurve.from_json(StepCurve.from_ambiguity(amb).to_json())
    assert again.knots == (0.0, 1.0) and again.levels == (1.0,)
    with pytest.raises(ContractError):
        CapacityCurve.from_json({"kind": "nope"})


def _exact_sum(amb, q):
    # sum over ordered magnitudes of (x_k^q - x_{k-1}^q) V(|X| > x_{k-1})
    mags = np.unique(np.abs(amb.support))
    prev, total = 0.0, 0.0
    for x in mags[mags > 0]:
        total += (x**q - prev**q) * float(np.max(amb.prob_matrix @ (np.abs(amb.support) > prev)))
        prev = x
    return total


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 1.0, 2.0]))
def test_step_curve_matches_exact_sum(seed, q):
    amb = random_ambiguity_set(np.random.default_rng(seed))
    assert choquet_moment(StepCurve.from_ambiguity(amb), MomentQuery(q)).value == pytest.approx(
        _exact_sum(amb, q), abs=1e-10
    )


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 3.0))
def test_truncation_subadditivity(seed, c):
    amb = random_ambiguity_set(np.random.default_rng(seed))
    curve = StepCurve.from_ambiguity(amb)
    full = choquet_moment(curve, MomentQuery(2)).value
    above = choquet_moment(curve, MomentQuery(2, c=c)).value
    # the part below c: g(min(|X|, c)) - g(c) I(|X| > c) has its own step curve
    below = sum(
        lv * (min(hi, c) ** 2 - min(lo, c) ** 2)
        for lo, hi, lv in zip(curve.knots, curve.knots[1:], curve.levels)
    ) - c**2 * float(curve.survival(c))
    below = max(below, 0.0)
    assert full <= below + above + 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(1.2, 5.0), st.floats(0.2, 1.0), st.floats(0.5, 3.0))
def test_pareto_moment_monotone_in_q_and_tail(a, frac, s):
    q1, q2 = frac * a * 0.5, frac * a * 0.9
    curve = ParetoCurve(a, s)
    m1, m2 = choquet_moment(curve, MomentQuery(q1)), choquet_moment(curve, MomentQuery(q2))
    if s >= 1:
        assert m1.value <= m2.value * (1 + 1e-9)
    lighter = ParetoCurve(a + 0.5, s)
    assert choquet_moment(lighter, MomentQuery(q2)).value <= m2.value * (1 + 1e-9)


def test_lemma1_examples():
    fin = lemma1_check(ParetoCurve(3), 1, 1, 0.5)
    assert fin.verdict == "consistent" and fin.rhs.finite and math.isfinite(fin.ratio)
    div = lemma1_check(ParetoCurve(1.5), 1, 1, 1)
    assert div.verdict == "consistent" and div.lhs_divergent and div.rhs.divergent
    zero = lemma1_check(StepCurve.from_ambiguity(AmbiguitySet.of(FiniteDistribution.point_mass(0.0))), 1, 1, 0)
    assert zero.lhs_partial == 0 and zero.rhs.value == 0 and zero.verdict == "consistent"
    with pytest.raises(ContractError):
        lemma1_check(ParetoCurve(3), 1, 1, -1)


def test_lemma1_ratio_bounded_as_umax_grows():
    ratios = [lemma1_check(ParetoCurve(3), 1, 1, 0.5, u_max=u).ratio for u in (1e2, 1e3, 1e4)]
    assert all(0 < r < 10 for r in ratios)
    assert ratios[0] <= ratios[1] <= ratios[2]
