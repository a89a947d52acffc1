"""Capacity curves x -> V(|X| > x) and Choquet moments computed from them.

For a nonnegative variable Y the Choquet expectation is
``C_V(Y) = int_0^inf V(Y > y) dy``.  Moments of the form
``g(|X|) I(|X| > c)`` with ``g(x) = x^q`` or ``x^q ln(1 + x)`` are obtained by the
change of variables y = g(x)::

    C_V(g(|X|) I(|X| > c)) = g(c) V(|X| > c) + int_c^inf g'(x) V(|X| > x) dx

Step curves (from ambiguity sets or explicit point lists) are integrated
exactly piece by piece.  Pareto-type curves are integrated over geometrically
doubling segments with paired Gauss-Legendre rules; the doubling stops when
the increment and the extrapolated tail are below tolerance, or returns a
divergence verdict when the partial integral passes a threshold or the
increments stop shrinking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .ambiguity import AmbiguitySet
from .errors import ContractError

DIVERGENCE_THRESHOLD = 1e6
ABS_TOL = 1e-8
# increments shrinking slower than this per doubling count as x^(-1) decay or worse
_NONDECAY_RATIO = 2.0 ** -1e-3
_NONDECAY_WINDOW = 16
# increments growing faster than this per doubling reach the threshold quickly,
# so the threshold (not the decay test) decides
_FAST_GROWTH = 1.05
_MAX_DOUBLINGS = 1000
_BATCH = 32


@lru_cache(maxsize=None)
def _gauss(order: int):
    return np.polynomial.legendre.leggauss(order)


class CapacityCurve:
    """Survival function ``x -> V(|X| > x)`` of a nonnegative magnitude."""

    kind: str

    def survival(self, x):
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_json(obj) -> "CapacityCurve":
        kind = obj.get("kind")
        if kind == "pareto":
            return ParetoCurve(float(obj["a"]), float(obj.get("s", 1.0)))
        if kind == "empirical":
            return StepCurve.from_ambiguity(AmbiguitySet.from_json(obj["ambiguity"]))
        if kind == "bounded":
            return StepCurve.from_points(obj["points"])
        raise ContractError(f"unknown curve kind {kind!r}")


@dataclass(frozen=True)
class StepCurve(CapacityCurve):
    """Right-continuous step survival: ``levels[k]`` on ``[knots[k], knots[k+1])``, zero past the last knot.

    ``knots`` starts at 0 and increases strictly; ``levels`` is nonincreasing
    with ``len(levels) == len(knots) - 1``.
    """

    knots: tuple
    levels: tuple
    kind: str = "bounded"
    source: AmbiguitySet | None = None

    def __post_init__(self):
        if len(self.knots) != len(self.levels) + 1 or self.knots[0] != 0.0:
            raise ContractError("step curve needs knots starting at 0 and one level per interval")
        if any(b <= a for a, b in zip(self.knots, self.knots[1:])):
            raise ContractError("knots must increase strictly")
        if any(not 0.0 <= v <= 1.0 for v in self.levels):
            raise ContractError("survival levels must lie in [0, 1]")
        if any(b > a + 1e-15 for a, b in zip(self.levels, self.levels[1:])):
            raise ContractError("survival must be nonincreasing")

    @classmethod
    def from_ambiguity(cls, amb: AmbiguitySet) -> "StepCurve":
        mags = np.abs(amb.support)
        pos = np.unique(mags[mags > 0])
        knots = [0.0] + pos.tolist()
        levels = []
        for lo in knots[:-1]:
            # probabilities summing to 1 + ulp must not push a level above 1
            levels.append(min(1.0, float(np.max(amb.prob_matrix @ (mags > lo).astype(float)))))
        return cls(tuple(knots), tuple(levels), kind="empirical", source=amb)

    @classmethod
    def from_points(cls, points) -> "StepCurve":
        """``[[x0, v0], [x1, v1], ...]`` with x0 = 0; the final level must be 0."""
        pts = [(float(x), float(v)) for x, v in points]
        if not pts or pts[-1][1] != 0.0:
            raise ContractError("bounded curve must end at survival level 0")
        return cls(tuple(x for x, _ in pts), tuple(v for _, v in pts[:-1]), kind="bounded")

    @classmethod
    def indicator(cls, capacity: float) -> "StepCurve":
        """Curve of I_A with V(A) = capacity."""
        return cls((0.0, 1.0), (float(capacity),), kind="bounded")

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(self.knots), x, side="right") - 1
        lv = np.append(np.asarray(self.levels), 0.0)
        return lv[np.clip(idx, 0, len(self.levels))]

    def to_json(self) -> dict:
        if self.kind == "empirical" and self.source is not None:
            return {"kind": "empirical", "ambiguity": self.source.to_json()}
        return {"kind": "bounded", "points": [[x, v] for x, v in zip(self.knots, self.levels + (0.0,))]}


@dataclass(frozen=True)
class ParetoCurve(CapacityCurve):
    """survival(x) = min(1, (x / s)^(-a))."""

    a: float
    s: float = 1.0
    kind: str = "pareto"

    def __post_init__(self):
        if not (self.a > 0 and self.s > 0):
            raise ContractError("pareto curve needs a > 0 and s > 0")

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.minimum(1.0, (x / self.s) ** -self.a)

    def to_json(self) -> dict:
        return {"kind": "pareto", "a": self.a, "s": self.s}


@dataclass(frozen=True)
class MomentQuery:
    """C_V(|X|^q [ln(1+|X|)] [I(|X| > c)])."""

    q: float
    log_factor: bool = False
    c: float = 0.0

    def __post_init__(self):
        if not self.q > 0:
            raise ContractError("moment exponent must be positive")
        if not self.c >= 0:
            raise ContractError("truncation level must be nonnegative")

    def g(self, x):
        x = np.asarray(x, dtype=float)
        out = x**self.q
        return out * np.log1p(x) if self.log_factor else out


@dataclass(frozen=True)
class ChoquetValue:
    """Extended-real result: when ``divergent`` is set, ``value`` is the partial integral at ``cutoff``."""

    value: float
    error: float
    divergent: bool = False
    cutoff: float = math.inf

    @property
    def finite(self) -> bool:
        return not self.divergent

    def __float__(self):
        return math.inf if self.divergent else self.value


def _segment_sums(f, lo: np.ndarray, hi: np.ndarray):
    """Gauss-Legendre estimates of int f over each [lo_i, hi_i] at orders 12 and 24."""
    out = []
    for order in (12, 24):
        t, w = _gauss(order)
        mid, half = (hi + lo) / 2, (hi - lo) / 2
        x = mid[:, None] + half[:, None] * t[None, :]
        out.append(half * (f(x) @ w))
    return out[1], np.abs(out[1] - out[0])


def _refine(f, lo: float, hi: float, depth: int = 0):
    coarse, err = _segment_sums(f, np.array([lo]), np.array([hi]))
    if err[0] <= 1e-13 * abs(coarse[0]) + 1e-300 or depth >= 30:
        return float(coarse[0]), float(err[0])
    m = (lo + hi) / 2
    a, ea = _refine(f, lo, m, depth + 1)
    b, eb = _refine(f, m, hi, depth + 1)
    return a + b, ea + eb


def integrate_tail(
    f,
    start: float,
    abs_tol: float = ABS_TOL,
    rel_tol: float = 0.0,
    threshold: float = DIVERGENCE_THRESHOLD,
) -> ChoquetValue:
    """int_start^inf f(x) dx for a nonnegative, eventually monotone integrand.

    Segments are [start 2^k, start 2^(k+1)].  Converged when the last increment
    and the geometric extrapolation of the remaining tail are both below
    ``max(abs_tol, rel_tol * partial) / 2``.
    """
    if not start > 0:
        raise ContractError("tail integration needs a positive start")
    partial = 0.0
    err = 0.0
    incs: list = []
    for first in range(0, _MAX_DOUBLINGS, _BATCH):
        k = np.arange(first, min(first + _BATCH, _MAX_DOUBLINGS), dtype=float)
        lo = start * 2.0**k
        hi = 2 * lo
        with np.errstate(over="ignore", invalid="ignore"):
            vals, errs = _segment_sums(f, lo, hi)
        for j in range(len(k)):
            inc, e = float(vals[j]), float(errs[j])
            if not math.isfinite(inc):
                return ChoquetValue(partial, err, True, float(lo[j]))
            if e > 1e-12 * abs(inc) + 1e-300:
                inc, e = _refine(f, float(lo[j]), float(hi[j]))
            partial += inc
            err += e
            incs.append(inc)
            if partial > threshold:
                return ChoquetValue(partial, err, True, float(hi[j]))
            if len(incs) > _NONDECAY_WINDOW and incs[-1] > 0:
                window = incs[-_NONDECAY_WINDOW - 1 :]
                slow = window[-1] < window[-2] * _FAST_GROWTH
                if slow and all(b >= a * _NONDECAY_RATIO for a, b in zip(window, window[1:])):
                    return ChoquetValue(partial, err, True, float(hi[j]))
            tol = max(abs_tol, rel_tol * abs(partial)) / 2
            if inc <= tol and len(incs) >= 2:
                prev = incs[-2]
                if inc == 0.0:
                    tail = 0.0
                elif prev > 0 and inc < prev:
                    rho = inc / prev
                    tail = inc * rho / (1 - rho)
                else:
                    tail = math.inf
                if tail <= tol:
                    return ChoquetValue(partial + tail, err + tail, False, float(hi[j]))
    return ChoquetValue(partial, err, True, float(start * 2.0**_MAX_DOUBLINGS))


def _pareto_integrand(curve: ParetoCurve, query: MomentQuery):
    q, a, s = query.q, curve.a, curve.s

    def f(x):
        lx = np.log(x)
        base = np.exp((q - 1) * lx - a * (lx - math.log(s)))
        if query.log_factor:
            return base * (q * np.log1p(x) + x / (1 + x))
        return q * base

    return f


def choquet_moment(curve: CapacityCurve, query: MomentQuery, abs_tol: float = ABS_TOL, rel_tol: float = 0.0,
                   threshold: float = DIVERGENCE_THRESHOLD) -> ChoquetValue:
    """C_V of ``query.g(|X|) I(|X| > query.c)`` under ``curve``."""
    c = query.c
    g = query.g
    if isinstance(curve, StepCurve):
        knots = np.asarray(curve.knots)
        levels = np.asarray(curve.levels)
        lo = np.maximum(knots[:-1], c)
        hi = np.maximum(knots[1:], c)
        body = float(np.sum(levels * (g(hi) - g(lo))))
        plateau = float(g(c)) * float(curve.survival(c)) if c > 0 else 0.0
        return ChoquetValue(plateau + body, 0.0)
    if isinstance(curve, ParetoCurve):
        head_end = max(c, curve.s)
        plateau = float(g(c)) * float(curve.survival(c)) if c > 0 else 0.0
        head = float(g(head_end) - g(c))  # survival is 1 on [c, s]
        tail = integrate_tail(_pareto_integrand(curve, query), head_end, abs_tol, rel_tol, threshold)
        offset = plateau + head
        return ChoquetValue(offset + tail.value, tail.error, tail.divergent, tail.cutoff)
    raise ContractError(f"unsupported curve {curve!r}")


def choquet_expectation(curve: CapacityCurve, **kw) -> ChoquetValue:
    """C_V(|X|) for the magnitude described by ``curve``."""
    return choquet_moment(curve, MomentQuery(1.0), **kw)


def finiteness_classify(curve: CapacityCurve, query: MomentQuery) -> str:
    """Analytic verdict for Pareto curves: ``"finite"`` iff q < a, else ``"divergent"``.

    At q == a the integrand decays like 1/x (times ln x with the log factor),
    which diverges either way.
    """
    if not isinstance(curve, ParetoCurve):
        raise ContractError("analytic finiteness is only available for pareto curves")
    return "finite" if query.q < curve.a else "divergent"


@dataclass(frozen=True)
class Lemma1Result:
    lhs_partial: float
    rhs: ChoquetValue
    u_reached: float
    last_increment: float
    lhs_divergent: bool
    verdict: str

    @property
    def ratio(self) -> float:
        if self.lhs_divergent or self.rhs.divergent:
            return math.nan
        return self.lhs_partial / self.rhs.value if self.rhs.value > 0 else 0.0


def lemma1_check(
    curve: CapacityCurve,
    alpha: float,
    gamma: float,
    beta: float,
    u_max: float = 2.0**64,
    log_weighted: bool = False,
    threshold: float = DIVERGENCE_THRESHOLD,
    stable_rel: float = 1e-6,
) -> Lemma1Result:
    """Compare int_1^u_max u^beta [ln u] C_V(|X|^alpha I(|X| > u^gamma)) du with the moment bound.

    The right side is C_V(|X|^((beta+1)/gamma + alpha)) (times ln(1+|X|) when
    ``log_weighted``).  Because the constant in the inequality is unspecified,
    the check is co-finiteness: a finite right side must come with a left
    side whose last doubling adds less than ``stable_rel`` of its value, and a
    divergent right side with a left side passing ``threshold``.
    """
    if not (alpha > 0 and gamma > 0 and beta > -1):
        raise ContractError("need alpha > 0, gamma > 0 and beta > -1")
    if not u_max > 1:
        raise ContractError("u_max must exceed 1")
    target = (beta + 1) / gamma + alpha
    rhs = choquet_moment(curve, MomentQuery(target, log_weighted), threshold=threshold)

    def inner(u):
        return choquet_moment(curve, MomentQuery(alpha, False, u**gamma), abs_tol=1e-300, rel_tol=1e-10)

    if isinstance(curve, StepCurve):
        breaks = [x ** (1 / gamma) for x in curve.knots[1:] if x ** (1 / gamma) > 1]
    else:
        breaks = [curve.s ** (1 / gamma)] if curve.s ** (1 / gamma) > 1 else []

    t, w = _gauss(16)
    lhs = 0.0
    last = 0.0
    u = 1.0
    divergent = False
    while u < u_max:
        u_next = min(2 * u, u_max)
        pts = [u] + sorted(b for b in breaks if u < b < u_next) + [u_next]
        inc = 0.0
        for lo, hi in zip(pts, pts[1:]):
            mid, half = (lo + hi) / 2, (hi - lo) / 2
            for node, weight in zip(mid + half * t, w):
                m = inner(node)
                if m.divergent:
                    divergent = True
                    break
                factor = node**beta * (math.log(node) if log_weighted else 1.0)
                inc += half * weight * factor * m.value
            if divergent:
                break
        if divergent:
            lhs = math.inf
            break
        lhs += inc
        last = inc
        u = u_next
        if lhs > threshold:
            divergent = True
            break
        if rhs.finite and lhs > 0 and inc <= stable_rel * lhs and u >= 4:
            break
        if lhs == 0.0 and u > max(breaks, default=1.0) and rhs.finite:
            break

    if rhs.finite:
        ok = not divergent and last <= stable_rel * lhs
    else:
        ok = divergent
    return Lemma1Result(lhs, rhs, u, last, divergent, "consistent" if ok else "inconsistent")
