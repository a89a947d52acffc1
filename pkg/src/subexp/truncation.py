"""Four-piece truncation of weighted summands and the proof-side diagnostics.

With t = n^(-delta) and b = eps/K, a weighted summand ax is split as

    x1 = ax clipped to [-t, t]
    x2 = (ax - t)      on  t < ax < b
    x3 = (ax + t)      on -b < ax < -t
    x4 = (ax - t)      on ax >= b,   (ax + t) on ax <= -b

These rules presume t < b (n large); for t >= b the fourth piece is
restricted to |ax| > t so that the pieces still add up to ax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ambiguity import (
    DEFAULT_BUDGET,
    AmbiguitySet,
    PengSequenceModel,
    _leaf_grid,
    _STATE_DIGITS,
    adaptive_state_value,
    lower_mean,
    upper_capacity,
    upper_mean,
)
from .errors import ContractError, HypothesisError
from .weights import WeightScheme, weight_row


@dataclass(frozen=True)
class TruncationParams:
    delta: float
    cap_k: int
    eps: float
    n: int

    def __post_init__(self):
        if not self.delta > 0:
            raise ContractError("delta must be positive")
        if int(self.cap_k) != self.cap_k or self.cap_k < 1:
            raise ContractError("K must be a positive integer")
        if not self.eps > 0:
            raise ContractError("eps must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise ContractError("n must be a positive integer")

    @property
    def clip(self) -> float:
        return float(self.n) ** -self.delta

    @property
    def big(self) -> float:
        return self.eps / self.cap_k


@dataclass(frozen=True)
class Decomposition:
    x1: float
    x2: float
    x3: float
    x4: float

    def total(self) -> float:
        return self.x1 + self.x2 + self.x3 + self.x4


def _remainder(ax: float, core: float) -> float:
    """A float r near ax - core with core + r == ax in floating point.

    Always achievable unless every candidate sum is a round-half tie; then
    the sum is off by one ulp of ax.
    """
    r = ax - core
    if core + r == ax:
        return r
    for cand in (math.nextafter(r, math.inf), math.nextafter(r, -math.inf)):
        if core + cand == ax:
            return cand
    return r


def decompose(ax: float, params: TruncationParams) -> Decomposition:
    ax = float(ax)
    t, b = params.clip, params.big
    x1 = min(max(ax, -t), t)
    x2 = x3 = x4 = 0.0
    if ax > t:
        rest = _remainder(ax, t)
        if ax < b:
            x2 = rest
        else:
            x4 = rest
    elif ax < -t:
        rest = _remainder(ax, -t)
        if ax > -b:
            x3 = rest
        else:
            x4 = rest
    return Decomposition(x1, x2, x3, x4)


def _pieces(weights, point, params) -> np.ndarray:
    """``(4, n)`` array of the pieces of each weighted coordinate."""
    out = np.empty((4, len(weights)))
    for i, (a, x) in enumerate(zip(weights, point)):
        d = decompose(float(a) * float(x), params)
        out[:, i] = (d.x1, d.x2, d.x3, d.x4)
    return out


@dataclass(frozen=True)
class InclusionReport:
    n_points: int
    n_triggered: int
    violations: int
    piece_hits: tuple

    @property
    def holds(self) -> bool:
        return self.violations == 0


def inclusion_check(
    model: PengSequenceModel,
    weights: Sequence[float],
    params: TruncationParams,
    sample_points=None,
    budget: int = DEFAULT_BUDGET,
) -> InclusionReport:
    """Check pointwise that max_k |sum a x| > 4 eps forces some piece's max_k |partial sum| > eps.

    ``sample_points`` defaults to every point of the product support.
    """
    n = model.length
    if len(weights) != n:
        raise ContractError("one weight per coordinate required")
    if sample_points is None:
        s = len(model.marginal.support)
        if s**n > budget:
            raise ContractError("full enumeration exceeds the budget; pass sample_points")
        sample_points = _leaf_grid(model.marginal.support, n)
    w = np.asarray(weights, dtype=float)
    triggered = violations = 0
    hits = [0, 0, 0, 0]
    count = 0
    for point in sample_points:
        count += 1
        whole = np.max(np.abs(np.cumsum(w * np.asarray(point, dtype=float))))
        if not whole > 4 * params.eps:
            continue
        triggered += 1
        fired = np.max(np.abs(np.cumsum(_pieces(w, point, params), axis=1)), axis=1) > params.eps
        for j in range(4):
            hits[j] += int(fired[j])
        if not fired.any():
            violations += 1
    return InclusionReport(count, triggered, violations, tuple(hits))


def piece4_containment(model, weights, params, budget: int = DEFAULT_BUDGET) -> bool:
    """(max_k |sum x4| > eps) implies (max_i |a_i X_i| > eps/K), at every support point."""
    n = model.length
    if len(model.marginal.support) ** n > budget:
        raise ContractError("full enumeration exceeds the budget")
    w = np.asarray(weights, dtype=float)
    for point in _leaf_grid(model.marginal.support, n):
        x4 = _pieces(w, point, params)[3]
        if np.max(np.abs(np.cumsum(x4))) > params.eps and not np.max(np.abs(w * point)) > params.big:
            return False
    return True


@dataclass(frozen=True)
class AtLeastKResult:
    lhs: float
    union_rhs: float
    power_rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.union_rhs + 1e-12 and self.union_rhs <= self.power_rhs + 1e-12


def at_least_k_bound(
    model: PengSequenceModel, weights: Sequence[float], params: TruncationParams, budget: int = DEFAULT_BUDGET
) -> AtLeastKResult:
    """V(sum x2 > eps) <= V(at least K indices with a_i X_i > t) <= (sum_j V(a_j X > t))^K."""
    w = [float(a) for a in weights]
    if len(w) != model.length:
        raise ContractError("one weight per coordinate required")
    t, eps, K = params.clip, params.eps, params.cap_k

    def sum_step(k, state, x):
        if state is True:
            return True
        nxt = round(state + decompose(w[k - 1] * x, params).x2, _STATE_DIGITS)
        return True if nxt > eps else nxt

    lhs = adaptive_state_value(model, 0.0, sum_step, lambda s: 1.0 if s is True else 0.0, budget)
    union = adaptive_state_value(
        model,
        0,
        lambda k, c, x: min(K, c + (w[k - 1] * x > t)),
        lambda c: 1.0 if c >= K else 0.0,
        budget,
    )
    single = math.fsum(upper_capacity(model.marginal, lambda x, a=a: a * x > t) for a in w)
    return AtLeastKResult(lhs, union, single**K)


@dataclass(frozen=True)
class DriftReport:
    drift_by_n: tuple
    threshold: float

    @property
    def decays(self) -> bool:
        return self.drift_by_n[-1][1] < self.drift_by_n[0][1]

    @property
    def below_threshold(self) -> bool:
        return self.drift_by_n[-1][1] <= self.threshold

    @property
    def conforming(self) -> bool:
        return self.decays and self.below_threshold


def centering_drift(
    marginal: AmbiguitySet,
    scheme: WeightScheme,
    delta: float,
    n_grid: Sequence[int],
    threshold: float = 0.05,
    tol: float = 1e-12,
) -> DriftReport:
    """max_k |sum_{i<=k} E[x1_ni]| for each n, where x1 clips a_ni X to [-n^-delta, n^-delta].

    For 1/2 < p <= 1 the marginal must satisfy E[X] = -E[-X] = 0.
    """
    if not delta > 0:
        raise ContractError("delta must be positive")
    if scheme.p <= 1:
        hi, lo = upper_mean(marginal), lower_mean(marginal)
        if abs(hi) > tol or abs(lo) > tol:
            raise HypothesisError(
                f"for 1/2 < p <= 1 the mean-zero hypothesis E[X] = -E[-X] = 0 is required "
                f"(upper mean {hi:.3g}, lower mean {lo:.3g})"
            )
    support = marginal.support
    P = marginal.prob_matrix
    rows = []
    for n in n_grid:
        t = float(n) ** -delta
        a = weight_row(scheme, int(n))
        clipped = np.clip(a[:, None] * support[None, :], -t, t)  # (n, s)
        means = np.max(P @ clipped.T, axis=0)  # upper expectation per index
        rows.append((int(n), float(np.max(np.abs(np.cumsum(means))))))
    return DriftReport(tuple(rows), threshold)
