"""Exact small-scale checks of the moment and capacity inequalities.

Each check evaluates both sides on a Peng-independent sequence model with the
exact recursion.  Where the inequality carries an unspecified constant, the
check reports the ratio of the two sides; boundedness of that ratio across a
random suite is the testable content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ambiguity import (
    DEFAULT_BUDGET,
    AmbiguitySet,
    Payoff,
    PengSequenceModel,
    adaptive_state_value,
    random_ambiguity_set,
    sequence_upper_expectation,
    shift,
    upper_capacity,
    upper_expectation,
    upper_mean,
)
from .errors import ContractError, HypothesisError


def log_floor(x: float) -> float:
    """ln(max(e, x)), so the result is never below 1."""
    return math.log(max(math.e, x))


@dataclass(frozen=True)
class InequalityCheck:
    lhs: float
    rhs: float
    holds: bool

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else math.inf
        return self.lhs / self.rhs


def _abs_moment(amb: AmbiguitySet, p: float) -> float:
    return upper_expectation(amb, Payoff(lambda x: np.abs(x) ** p, vectorized=True))


def _tail_max_payoff(p: float, n: int) -> Payoff:
    # |max_{0<=k<=n} (S_n - S_k)|^p ; the k = n term contributes 0
    def fn(x):
        tails = np.cumsum(x[:, ::-1], axis=1)
        return np.abs(np.maximum(tails.max(axis=1), 0.0)) ** p

    return Payoff(fn, arity=n, vectorized=True)


def _require_nonpositive_mean(model: PengSequenceModel, tol: float = 1e-12):
    m = upper_mean(model.marginal)
    if m > tol:
        raise HypothesisError(f"upper mean {m} is positive; the inequality assumes E[X_i] <= 0")


def lemma2_check(model: PengSequenceModel, p: float, budget: int = DEFAULT_BUDGET) -> InequalityCheck:
    """E|max_k (S_n - S_k)|^p <= 2^(2-p) sum_k E|X_k|^p for 1 <= p <= 2."""
    if not 1 <= p <= 2:
        raise ContractError("the constant 2^(2-p) applies for 1 <= p <= 2")
    _require_nonpositive_mean(model)
    n = model.length
    lhs = sequence_upper_expectation(model, _tail_max_payoff(p, n), budget)
    rhs = 2.0 ** (2 - p) * n * _abs_moment(model.marginal, p)
    return InequalityCheck(lhs, rhs, lhs <= rhs * (1 + 1e-12) + 1e-15)


def lemma2b_ratio(model: PengSequenceModel, p: float, budget: int = DEFAULT_BUDGET) -> InequalityCheck:
    """Ratio of E|max_k (S_n - S_k)|^p to sum E|X_k|^p + (sum E X_k^2)^(p/2), p >= 2."""
    if p < 2:
        raise ContractError("the Rosenthal-type bound is stated for p >= 2")
    _require_nonpositive_mean(model)
    n = model.length
    lhs = sequence_upper_expectation(model, _tail_max_payoff(p, n), budget)
    rhs = n * _abs_moment(model.marginal, p) + (n * _abs_moment(model.marginal, 2)) ** (p / 2)
    return InequalityCheck(lhs, rhs, math.isfinite(lhs) and math.isfinite(rhs))


def lemma3_ratio(model: PengSequenceModel, M: float, budget: int = DEFAULT_BUDGET) -> InequalityCheck:
    """Ratio of E max_j |S_j|^M to log^M n (sum E|X_i|^M + (sum E X_i^2)^(M/2)), M >= 2."""
    if M < 2:
        raise ContractError("M must be at least 2")
    _require_nonpositive_mean(model)
    n = model.length

    def fn(x):
        return np.abs(np.cumsum(x, axis=1)).max(axis=1) ** M

    lhs = sequence_upper_expectation(model, Payoff(fn, arity=n, vectorized=True), budget)
    bracket = n * _abs_moment(model.marginal, M) + (n * _abs_moment(model.marginal, 2)) ** (M / 2)
    rhs = log_floor(n) ** M * bracket
    return InequalityCheck(lhs, rhs, math.isfinite(lhs) and math.isfinite(rhs))


def max_abs_exceed_capacity(model: PengSequenceModel, x: float, budget: int = DEFAULT_BUDGET) -> float:
    """V(max_j |X_j| > x) via a two-state (seen / not yet seen) recursion."""
    return adaptive_state_value(
        model,
        False,
        lambda k, seen, v: seen or abs(v) > x,
        lambda seen: 1.0 if seen else 0.0,
        budget,
    )


def lemma4_check(model: PengSequenceModel, x: float, budget: int = DEFAULT_BUDGET) -> InequalityCheck:
    """[1 - V(max_j |X_j| > x)]^2 sum_j V(|X_j| > x) <= 4 V(max_j |X_j| > x)."""
    if not x > 0:
        raise ContractError("x must be positive")
    v_max = max_abs_exceed_capacity(model, x, budget)
    v_one = upper_capacity(model.marginal, lambda v: abs(v) > x)
    lhs = (1.0 - v_max) ** 2 * model.length * v_one
    rhs = 4.0 * v_max
    return InequalityCheck(lhs, rhs, lhs <= rhs + 1e-12)


def random_centered_model(rng: np.random.Generator, max_n: int = 5, max_members: int = 3, max_atoms: int = 4):
    """Random model whose upper mean is <= 0 (shifted by its upper mean, plus a random drift down)."""
    amb = random_ambiguity_set(rng, max_members, max_atoms)
    amb = shift(amb, -upper_mean(amb) - float(rng.choice([0.0, rng.uniform(0, 0.5)])))
    n = int(rng.integers(1, max_n + 1))
    return PengSequenceModel(amb, n)


def random_model(rng: np.random.Generator, max_n: int = 5, max_members: int = 3, max_atoms: int = 4):
    amb = random_ambiguity_set(rng, max_members, max_atoms)
    return PengSequenceModel(amb, int(rng.integers(1, max_n + 1)))


# the ratio is the check: the constant in this inequality is unspecified
lemma3_check = lemma3_ratio
