import numpy as np
import pytest

from subexp.ambiguity import (
    FAIR_COIN,
    AmbiguitySet,
    FiniteDistribution,
    Payoff,
    PengSequenceModel,
    max_partial_sum_capacity,
    random_ambiguity_set,
    sequence_upper_expectation,
)
from subexp.errors import ContractError, ResourceError
from subexp.oracles import classical_probability, policy_enumeration_expectation


def _random_payoff(rng, n):
    c = rng.normal(size=n)
    return Payoff(lambda x, c=c: np.cos(x @ c) * np.abs(x).sum(axis=1), arity=n, vectorized=True)


def test_dp_matches_policy_enumeration(rng):
    for _ in range(40):
        amb = random_ambiguity_set(rng, 3, 3, common_support=True)
        model = PengSequenceModel(amb, int(rng.integers(1, 4)))
        payoff = _random_payoff(rng, model.length)
        assert sequence_upper_expectation(model, payoff) == pytest.approx(
            policy_enumeration_expectation(model, payoff), abs=1e-10
        )


def test_enumeration_cap():
    amb = AmbiguitySet.of(FAIR_COIN, FiniteDistribution.from_atoms([(-1, 0.2), (1, 0.8)]))
    with pytest.raises(ResourceError):
        policy_enumeration_expectation(PengSequenceModel(amb, 6), lambda x: 0.0, max_policies=1000)


def test_singleton_capacity_matches_classical_sum():
    dist = FiniteDistribution.from_atoms([(-2, 0.1), (0.5, 0.6), (1, 0.3)])
    model = PengSequenceModel(AmbiguitySet.of(dist), 4)
    w = np.array([0.4, 0.3, 0.2, 0.1])
    eps = 0.45

    def event(x):
        return np.max(np.abs(np.cumsum(w * np.array(x)))) > eps

    assert max_partial_sum_capacity(model, w, eps) == pytest.approx(classical_probability(model, event), abs=1e-14)


def test_classical_needs_singleton():
    amb = AmbiguitySet.of(FAIR_COIN, FiniteDistribution.point_mass(0.0))
    with pytest.raises(ContractError):
        classical_probability(PengSequenceModel(amb, 2), lambda x: True)
