import math

import numpy as np
import pytest

from subexp.ambiguity import FAIR_COIN, AmbiguitySet, FiniteDistribution, PengSequenceModel, upper_mean
from subexp.errors import ContractError, HypothesisError
from subexp.lemmas import (
    lemma2_check,
    lemma2b_ratio,
    lemma3_ratio,
    lemma4_check,
    log_floor,
    max_abs_exceed_capacity,
    random_centered_model,
    random_model,
)


def test_log_floor():
    assert log_floor(1) == 1.0
    assert log_floor(2) == 1.0
    assert log_floor(math.e**3) == pytest.approx(3.0)


def test_lemma2_fair_coin_n1_is_tight():
    # one step: E|max(X, 0)|^p = 1/2 against 2^(2-p) E|X|^p
    chk = lemma2_check(PengSequenceModel(AmbiguitySet.of(FAIR_COIN), 1), 2.0)
    assert chk.lhs == pytest.approx(0.5) and chk.rhs == pytest.approx(1.0) and chk.holds


def test_lemma2_requires_nonpositive_mean():
    up = AmbiguitySet.of(FiniteDistribution.from_atoms([(-1, 0.2), (1, 0.8)]))
    with pytest.raises(HypothesisError):
        lemma2_check(PengSequenceModel(up, 2), 1.5)
    with pytest.raises(ContractError):
        lemma2_check(PengSequenceModel(AmbiguitySet.of(FAIR_COIN), 2), 2.5)


def test_lemma2_random_suite(rng):
    for _ in range(30):
        model = random_centered_model(rng)
        assert upper_mean(model.marginal) <= 1e-12
        for p in (1.0, 1.5, 2.0):
            assert lemma2_check(model, p).holds


def test_lemma2b_and_3_ratios_are_finite(rng):
    ratios = []
    for _ in range(20):
        model = random_centered_model(rng)
        ratios.append(lemma2b_ratio(model, 3.0).ratio)
        ratios.append(lemma3_ratio(model, 2.0).ratio)
    assert all(math.isfinite(r) for r in ratios)
    with pytest.raises(ContractError):
        lemma3_ratio(random_centered_model(rng), 1.5)


def test_max_abs_exceed_singleton_formula():
    d = FiniteDistribution.from_atoms([(-3, 0.2), (0, 0.5), (2, 0.3)])
    model = PengSequenceModel(AmbiguitySet.of(d), 3)
    assert max_abs_exceed_capacity(model, 2.5) == pytest.approx(1 - 0.8**3)


def test_lemma4_random_suite(rng):
    for _ in range(30):
        model = random_model(rng)
        for x in rng.uniform(0.05, 3.0, size=5):
            assert lemma4_check(model, float(x)).holds
