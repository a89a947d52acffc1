"""Finite ambiguity sets and the sublinear expectations they generate.

A sublinear expectation is realised here as the upper envelope of classical
expectations over a finite family of finitely supported measures::

    E[f(X)] = max_m sum_k p_mk f(x_k)

Everything on this fragment is exactly computable, including functionals of
Peng-independent sequences, which reduce to a backward recursion in which the
adversary reselects a member of the family at every step.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .errors import ContractError, EvaluationError, ResourceError

DEFAULT_BUDGET = 10**7

# partial sums are keyed on this many decimals so that reorderings of the same
# floating-point additions land on one DP state
_STATE_DIGITS = 12

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class Payoff:
    """A test function phi applied to one or more coordinates.

    ``growth`` records the polynomial order m of the local Lipschitz bound and
    is metadata only; indicator payoffs are admitted with ``growth=0``.  With
    ``vectorized=True`` the function receives a whole array (shape ``(k,)`` for
    arity 1, ``(k, arity)`` otherwise) and must return shape ``(k,)``.
    """

    fn: Callable
    arity: int = 1
    growth: int = 1
    vectorized: bool = False

    def __post_init__(self):
        if self.arity < 1:
            raise ContractError("payoff arity must be positive")

    def __call__(self, x):
        return self.fn(x)


def as_payoff(obj, arity=1) -> Payoff:
    if isinstance(obj, Payoff):
        return obj
    if not callable(obj):
        raise ContractError(f"payoff must be callable, got {type(obj).__name__}")
    return Payoff(obj, arity=arity)


def _evaluate(payoff: Payoff, points: np.ndarray) -> np.ndarray:
    """Evaluate ``payoff`` at each row of ``points`` and check finiteness."""
    if payoff.vectorized:
        out = np.asarray(payoff.fn(points), dtype=float).reshape(len(points))
    elif points.ndim == 1:
        out = np.array([payoff.fn(float(v)) for v in points], dtype=float)
    else:
        out = np.array([payoff.fn(tuple(float(v) for v in row)) for row in points], dtype=float)
    bad = ~np.isfinite(out)
    if bad.any():
        where = points[np.argmax(bad)]
        raise EvaluationError(f"payoff is not finite at atom {where!r}")
    return out


@dataclass(frozen=True)
class FiniteDistribution:
    """A probability measure on finitely many real atoms.

    Direct construction expects canonical input (strictly increasing values,
    positive probabilities summing to one); use :meth:`from_atoms` to
    canonicalise arbitrary ``(value, prob)`` pairs.
    """

    values: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise ContractError("a distribution needs at least one atom and matching probabilities")
        if any(not math.isfinite(v) for v in self.values):
            raise ContractError("atom values must be finite")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ContractError("atom values must be strictly increasing")
        if any(p < 0 or not math.isfinite(p) for p in self.probs):
            raise ContractError("probabilities must be finite and nonnegative")
        if abs(math.fsum(self.probs) - 1.0) > _PROB_TOL:
            raise ContractError(f"probabilities sum to {math.fsum(self.probs)!r}, not 1")

    @classmethod
    def from_atoms(cls, atoms: Iterable) -> "FiniteDistribution":
        merged: dict = {}
        for value, prob in atoms:
            value, prob = float(value), float(prob)
            if prob < 0:
                raise ContractError(f"negative probability {prob} at atom {value}")
            merged[value] = merged.get(value, 0.0) + prob
        kept = sorted((v, p) for v, p in merged.items() if p > 0)
        if not kept:
            raise ContractError("distribution has no atom with positive probability")
        return cls(tuple(v for v, _ in kept), tuple(p for _, p in kept))

    @classmethod
    def point_mass(cls, value: float) -> "FiniteDistribution":
        return cls((float(value),), (1.0,))

    @classmethod
    def bernoulli(cls, p: float) -> "FiniteDistribution":
        return cls.from_atoms([(0.0, 1.0 - p), (1.0, p)])

    @property
    def atoms(self):
        return list(zip(self.values, self.probs))

    def expect(self, fn) -> float:
        return math.fsum(p * fn(v) for v, p in zip(self.values, self.probs))

    def to_json(self) -> dict:
        return {"atoms": [[v, p] for v, p in self.atoms]}


FAIR_COIN = FiniteDistribution((-1.0, 1.0), (0.5, 0.5))


@dataclass(frozen=True)
class AmbiguitySet:
    """Nonempty finite family of distributions, stored in canonical order.

    Members are sorted and deduplicated so that two sets listing the same
    measures in different orders are equal and evaluate bit-identically.
    """

    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ContractError("an ambiguity set needs at least one member")
        for m in members:
            if not isinstance(m, FiniteDistribution):
                raise ContractError(f"member {m!r} is not a FiniteDistribution")
        canon = tuple(sorted(set(members), key=lambda d: (d.values, d.probs)))
        object.__setattr__(self, "members", canon)

    @classmethod
    def of(cls, *members: FiniteDistribution) -> "AmbiguitySet":
        return cls(tuple(members))

    @classmethod
    def from_json(cls, obj) -> "AmbiguitySet":
        """Build from ``{"members": [{"atoms": [[v, p], ...]}, ...]}`` (dict or string)."""
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            members = [FiniteDistribution.from_atoms(m["atoms"]) for m in obj["members"]]
        except (KeyError, TypeError) as exc:
            raise ContractError(f"malformed ambiguity literal: {exc!r}") from exc
        return cls(tuple(members))

    def to_json(self) -> dict:
        return {"members": [m.to_json() for m in self.members]}

    @cached_property
    def support(self) -> np.ndarray:
        """Sorted union of the members' atoms."""
        return np.array(sorted({v for m in self.members for v in m.values}), dtype=float)

    @cached_property
    def prob_matrix(self) -> np.ndarray:
        """``(members, support)`` matrix of probabilities, zero off each member's support."""
        index = {v: j for j, v in enumerate(self.support.tolist())}
        mat = np.zeros((len(self.members), len(self.support)))
        for i, m in enumerate(self.members):
            for v, p in zip(m.values, m.probs):
                mat[i, index[v]] = p
        return mat

    def __len__(self):
        return len(self.members)


def upper_expectation(amb: AmbiguitySet, payoff) -> float:
    """Largest member expectation of ``payoff(X)``."""
    payoff = as_payoff(payoff)
    if payoff.arity != 1:
        raise ContractError("upper_expectation takes an arity-1 payoff")
    vals = _evaluate(payoff, amb.support)
    return float(np.max(amb.prob_matrix @ vals))


def lower_expectation(amb: AmbiguitySet, payoff) -> float:
    payoff = as_payoff(payoff)
    vals = _evaluate(payoff, amb.support)
    return -float(np.max(amb.prob_matrix @ -vals))


def upper_mean(amb: AmbiguitySet) -> float:
    return float(np.max(amb.prob_matrix @ amb.support))


def lower_mean(amb: AmbiguitySet) -> float:
    return -float(np.max(amb.prob_matrix @ -amb.support))


def upper_capacity(amb: AmbiguitySet, event) -> float:
    """V(A) = E[I_A] for an event given as a 0/1-valued (or boolean) payoff."""
    payoff = as_payoff(event)
    vals = _evaluate(payoff, amb.support)
    if not np.all((vals == 0.0) | (vals == 1.0)):
        bad = amb.support[np.argmax((vals != 0.0) & (vals != 1.0))]
        raise ContractError(f"event is not an indicator: value {vals[amb.support == bad][0]} at atom {bad}")
    return float(min(1.0, max(0.0, np.max(amb.prob_matrix @ vals))))


@dataclass(frozen=True)
class PengSequenceModel:
    """X_1..X_n identically distributed under ``marginal``, each independent of its past."""

    marginal: AmbiguitySet
    length: int

    def __post_init__(self):
        if int(self.length) != self.length or self.length < 1:
            raise ContractError("sequence length must be a positive integer")


def _leaf_grid(support: np.ndarray, n: int) -> np.ndarray:
    s = len(support)
    idx = np.indices((s,) * n).reshape(n, -1).T
    return support[idx]


def sequence_upper_expectation(model: PengSequenceModel, payoff, budget: int = DEFAULT_BUDGET) -> float:
    """E[phi(X_1..X_n)] for a Peng-independent sequence, by backward recursion.

    psi_n = phi and psi_{k-1}(x_1..x_{k-1}) = max_m E_m[psi_k(x_1..x_{k-1}, X_k)];
    the answer is psi_0.  The whole product of supports is enumerated, so the
    cost is ``|support| ** n`` payoff evaluations.
    """
    n = model.length
    payoff = as_payoff(payoff, arity=n)
    if payoff.arity != n:
        raise ContractError(f"payoff arity {payoff.arity} does not match sequence length {n}")
    amb = model.marginal
    s = len(amb.support)
    required = s**n
    if required > budget:
        raise ResourceError(
            f"exact recursion needs {required} leaf states, budget is {budget}", required, budget
        )
    leaves = _leaf_grid(amb.support, n)
    vals = _evaluate(payoff, leaves)
    value = vals.reshape((s,) * n)
    P = amb.prob_matrix
    for _ in range(n):
        # contract the last coordinate against every member, keep the worst case
        value = np.max(np.tensordot(value, P, axes=([-1], [1])), axis=-1)
    return float(value)


def adaptive_state_value(
    model: PengSequenceModel,
    start: Hashable,
    step: Callable[[int, Hashable, float], Hashable],
    terminal: Callable[[Hashable], float],
    budget: int = DEFAULT_BUDGET,
) -> float:
    """Upper expectation of ``terminal(state_n)`` for a finite-state statistic.

    ``step(k, state, x)`` maps the state after k-1 observations and the k-th
    observation ``x`` to the next state (k is 1-based).  Histories that share a
    state are merged, so the cost is the number of distinct reachable states
    rather than ``|support| ** n``.
    """
    amb = model.marginal
    support = amb.support.tolist()
    P = amb.prob_matrix
    levels = [[start]]
    total = 1
    for k in range(1, model.length + 1):
        nxt: dict = {}
        for state in levels[-1]:
            for x in support:
                nxt.setdefault(step(k, state, x), None)
        total += len(nxt)
        if total > budget:
            raise ResourceError(
                f"state enumeration exceeded the budget of {budget} at step {k}", total, budget
            )
        levels.append(list(nxt))
    value = {state: float(terminal(state)) for state in levels[-1]}
    for k in range(model.length, 0, -1):
        new = {}
        for state in levels[k - 1]:
            cont = np.array([value[step(k, state, x)] for x in support])
            new[state] = float(np.max(P @ cont))
        value = new
    return value[start]


def max_partial_sum_capacity(
    model: PengSequenceModel,
    weights: Sequence[float],
    eps: float,
    j_range: tuple | None = None,
    budget: int = DEFAULT_BUDGET,
) -> float:
    """V(max_{j in j_range} |sum_{i<=j} w_i X_i| > eps), computed exactly.

    ``j_range`` is an inclusive interval of prefix lengths, default ``(1, n)``.
    Weight schemes indexed from 0 (the backward-power and Cesaro rows) use the
    same prefix-length convention: the row's first entry is prefix length 1.

    The recursion tracks the running partial sum for paths that have not yet
    crossed the threshold; crossing paths are absorbed with value one.  Once a
    path crosses, the running maximum no longer matters, so this is equivalent
    to carrying the pair (partial sum, running max).
    """
    n = model.length
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ContractError(f"expected {n} weights, got {w.size}")
    if not eps > 0:
        raise ContractError("eps must be positive")
    lo, hi = (1, n) if j_range is None else (int(j_range[0]), int(j_range[1]))
    if not 1 <= lo <= hi <= n:
        raise ContractError(f"j_range {j_range} outside 1..{n}")

    amb = model.marginal
    support = amb.support
    P = amb.prob_matrix

    levels = [np.zeros(1)]
    total = 1
    for k in range(1, hi + 1):
        cand = np.round(levels[-1][:, None] + w[k - 1] * support[None, :], _STATE_DIGITS)
        cand = np.unique(cand)
        if k >= lo:
            cand = cand[np.abs(cand) <= eps]
        total += cand.size
        if total > budget:
            raise ResourceError(
                f"exact capacity needs more than {budget} states (reached {total} by step {k}); "
                "use the Monte-Carlo estimator (method 'mc_grid') instead",
                total,
                budget,
            )
        levels.append(cand)

    value = np.zeros(levels[hi].size)
    for k in range(hi, 0, -1):
        nxt = np.round(levels[k - 1][:, None] + w[k - 1] * support[None, :], _STATE_DIGITS)
        live = levels[k]
        if live.size:
            idx = np.clip(np.searchsorted(live, nxt), 0, live.size - 1)
            cont = value[idx]
        else:
            cont = np.zeros_like(nxt)
        if k >= lo:
            cont = np.where(np.abs(nxt) > eps, 1.0, cont)
        value = np.max(cont @ P.T, axis=1)
    return float(min(1.0, max(0.0, value[0])))


@dataclass(frozen=True)
class AxiomReport:
    """Largest observed violation of each sublinear-expectation axiom."""

    monotonicity: float = 0.0
    constant: float = 0.0
    homogeneity: float = 0.0
    subadditivity: float = 0.0

    @property
    def max_violation(self) -> float:
        return max(self.monotonicity, self.constant, self.homogeneity, self.subadditivity)

    def ok(self, tol: float = 1e-10) -> bool:
        return self.max_violation <= tol


def check_axioms(amb: AmbiguitySet, payoff_suite: Sequence, lambda_grid: Sequence[float]) -> AxiomReport:
    """Measure violations of monotonicity, constant preservation, positive
    homogeneity and sub-additivity of ``upper_expectation`` over a payoff suite.

    Monotonicity is checked on every pair ordered pointwise on the support and
    on each pair (max(X, Y), X), which is always ordered.
    """
    if not payoff_suite:
        raise ContractError("payoff suite is empty")
    P = amb.prob_matrix
    rows = [_evaluate(as_payoff(f), amb.support) for f in payoff_suite]

    def E(v):
        return float(np.max(P @ v))

    ev = [E(v) for v in rows]
    mono = const = homog = subadd = 0.0
    for lam in lambda_grid:
        if lam < 0:
            raise ContractError("lambda grid must be nonnegative")
        for c in (lam, -lam):
            const = max(const, abs(E(np.full(len(amb.support), c)) - c))
        for v, e in zip(rows, ev):
            homog = max(homog, abs(E(lam * v) - lam * e))
    for (v, ex), (u, ey) in itertools.product(list(zip(rows, ev)), repeat=2):
        if np.all(v >= u):
            mono = max(mono, ey - ex)
        mono = max(mono, ex - E(np.maximum(v, u)))
        subadd = max(subadd, E(v + u) - ex - ey)
    return AxiomReport(max(mono, 0.0), const, homog, max(subadd, 0.0))


def random_ambiguity_set(
    rng: np.random.Generator,
    max_members: int = 4,
    max_atoms: int = 5,
    common_support: bool = False,
    scale: float = 3.0,
) -> AmbiguitySet:
    """Random test set with 1..max_members members of 1..max_atoms atoms.

    With ``common_support`` every member lives on one shared grid of at most
    ``max_atoms`` values (some probabilities may be zero), which keeps the
    union support small for enumeration oracles.
    """
    n_members = int(rng.integers(1, max_members + 1))
    if common_support:
        k = int(rng.integers(1, max_atoms + 1))
        grid = np.round(rng.uniform(-scale, scale, size=k), 3)
    members = []
    for _ in range(n_members):
        if common_support:
            vals = grid
        else:
            k = int(rng.integers(1, max_atoms + 1))
            vals = np.round(rng.uniform(-scale, scale, size=k), 3)
        w = rng.dirichlet(np.ones(len(vals)))
        if common_support and len(vals) > 1 and rng.random() < 0.3:
            w[rng.integers(len(vals))] = 0.0
            w = w / w.sum()
        try:
            members.append(FiniteDistribution.from_atoms(zip(vals, w)))
        except ContractError:
            members.append(FiniteDistribution.point_mass(float(vals[0])))
    return AmbiguitySet(tuple(members))


def shift(amb: AmbiguitySet, c: float) -> AmbiguitySet:
    """The law of X + c."""
    return AmbiguitySet(
        tuple(FiniteDistribution.from_atoms((v + c, p) for v, p in m.atoms) for m in amb.members)
    )
