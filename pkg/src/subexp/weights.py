"""Triangular weight arrays, Cesaro coefficients and the moment-regime classifier."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .choquet import MomentQuery
from .errors import ContractError

KINDS = ("forward_power", "backward_power", "cesaro")

# stored for completeness; no weight row ever reads A_0
CESARO_A0 = 0.0


def cesaro_coeff(alpha, n: int):
    """A_n^alpha = (alpha+1)(alpha+2)...(alpha+n)/n!.

    Evaluated by the recurrence A_n = A_{n-1} (alpha + n)/n.  Works with
    ``Fraction`` input for exact values.  ``n = 0`` returns 0.
    """
    if n < 0:
        raise ContractError("n must be nonnegative")
    if not alpha > -1:
        raise ContractError("alpha must exceed -1")
    if n == 0:
        return type(alpha)(CESARO_A0) if isinstance(alpha, Fraction) else CESARO_A0
    a = alpha + 1
    for k in range(2, n + 1):
        a = a * (alpha + k) / k
    return a


def cesaro_table(alpha: float, n_max: int, dps: int | None = None):
    """``[A_0, A_1, ..., A_{n_max}]`` in one pass of the recurrence (A_0 = 0).

    Returns a float array, or with ``dps`` a list of ``mpmath.mpf`` carried at
    that many decimal digits.  Differences A_n - A_{n-1} lose about
    log10(n/alpha) digits to cancellation, which float64 cannot spare at large n.
    """
    if dps is not None:
        import mpmath

        ctx = mpmath.mp.clone()
        ctx.dps = dps
        al = ctx.mpf(alpha)
        vals = [ctx.mpf(CESARO_A0)]
        a = ctx.mpf(1)
        for k in range(1, n_max + 1):
            a = a * (al + k) / k
            vals.append(a)
        return vals
    out = np.empty(n_max + 1)
    out[0] = CESARO_A0
    a = 1.0
    for k in range(1, n_max + 1):
        a = a * (alpha + k) / k
        out[k] = a
    return out


def cesaro_asymptotic_ratio(alpha: float, n: int) -> float:
    """A_n^alpha Gamma(alpha+1) / n^alpha, which tends to 1."""
    if n < 1:
        raise ContractError("n must be at least 1")
    return cesaro_coeff(float(alpha), n) * math.gamma(alpha + 1) / n**alpha


@dataclass(frozen=True)
class WeightScheme:
    """One of the three triangular arrays.

    forward_power:  a_ni = (i/n)^beta (1/n)^p,            i = 1..n
    backward_power: a_ni = ((n-i)/n)^beta (1/n)^p,        i = 0..n-1
    cesaro:         a_ni = (A_{n-i}^{alpha-1} / A_n^alpha)^p, i = 0..n-1
    """

    kind: str
    p: float
    beta: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown weight kind {self.kind!r}")
        if not self.p > 0.5:
            raise ContractError("p must exceed 1/2")
        if self.kind == "cesaro":
            if self.alpha is None or not 0 < self.alpha <= 1:
                raise ContractError("cesaro weights need alpha in (0, 1]")
        else:
            if self.beta is None or not self.beta + self.p > 0:
                raise ContractError("power weights need beta with beta + p > 0")

    @property
    def effective_beta(self) -> float:
        """beta, or p(alpha - 1) for the Cesaro scheme."""
        if self.kind == "cesaro":
            return self.p * (self.alpha - 1)
        return self.beta

    @classmethod
    def from_json(cls, obj: dict) -> "WeightScheme":
        try:
            return cls(obj["kind"], float(obj["p"]),
                       None if obj.get("beta") is None else float(obj["beta"]),
                       None if obj.get("alpha") is None else float(obj["alpha"]))
        except KeyError as exc:
            raise ContractError(f"weight scheme literal is missing {exc}") from exc

    def to_json(self) -> dict:
        out = {"kind": self.kind, "p": self.p}
        if self.kind == "cesaro":
            out["alpha"] = self.alpha
        else:
            out["beta"] = self.beta
        return out

    def indices(self, n: int) -> np.ndarray:
        if self.kind == "forward_power":
            return np.arange(1, n + 1)
        return np.arange(0, n)

    def row(self, n: int) -> np.ndarray:
        return weight_row(self, n)


def weight_row(scheme: WeightScheme, n: int) -> np.ndarray:
    """The n-th row of the array, in increasing index order."""
    if int(n) != n or n < 1:
        raise ContractError("n must be a positive integer")
    i = scheme.indices(n).astype(float)
    if scheme.kind == "forward_power":
        return (i / n) ** scheme.beta * (1.0 / n) ** scheme.p
    if scheme.kind == "backward_power":
        return ((n - i) / n) ** scheme.beta * (1.0 / n) ** scheme.p
    table = cesaro_table(scheme.alpha - 1, n)
    a_n = cesaro_coeff(float(scheme.alpha), n)
    return (table[(n - i).astype(int)] / a_n) ** scheme.p


@dataclass(frozen=True)
class RegimeParams:
    r: float
    p: float
    beta: float
    alpha: float | None = None

    def __post_init__(self):
        if not self.r > 1:
            raise ContractError("r must exceed 1")
        if not self.p > Fraction(1, 2):
            raise ContractError("p must exceed 1/2")
        if not self.beta + self.p > 0:
            raise ContractError("beta + p must be positive")
        if self.alpha is not None and not 0 < self.alpha <= 1:
            raise ContractError("alpha must lie in (0, 1]")

    @classmethod
    def from_cesaro(cls, r, p, alpha) -> "RegimeParams":
        return cls(r, p, p * (alpha - 1), alpha)

    @classmethod
    def from_json(cls, obj: dict) -> "RegimeParams":
        if obj.get("alpha") is not None and obj.get("beta") is None:
            return cls.from_cesaro(float(obj["r"]), float(obj["p"]), float(obj["alpha"]))
        return cls(float(obj["r"]), float(obj["p"]), float(obj["beta"]))

    def to_json(self) -> dict:
        out = {"r": self.r, "p": self.p, "beta": self.beta}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        return out


HEAVY_EXPONENT_NOTE = (
    "heavy regime uses exponent (r-1)/(p+beta); the variant (r+1)/(p+beta) that "
    "is sometimes quoted does not match the truncation bound and is not used"
)


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    moment_query: MomentQuery
    notes: tuple = ()

    @property
    def exponent(self) -> float:
        return self.moment_query.q

    def describe(self) -> str:
        text = f"{self.regime} regime, moment exponent {self.exponent:g}"
        if self.moment_query.log_factor:
            text += " with log factor"
        return text


def _all_rational(*xs) -> bool:
    return all(isinstance(x, Rational) for x in xs)


def regime_classify(params: RegimeParams) -> RegimeReport:
    """Which Choquet moment condition matches the series for (r, p, beta).

    heavy (-p < beta < -p/r): |X|^((r-1)/(p+beta));
    boundary (beta = -p/r):   |X|^(r/p) ln(1+|X|);
    light (beta > -p/r):      |X|^(r/p).
    For Cesaro weights beta = p(alpha - 1), so the cut is alpha against 1 - 1/r.
    """
    r, p, beta = params.r, params.p, params.beta
    notes = []
    if params.alpha is not None and _all_rational(r, params.alpha):
        # compare alpha with 1 - 1/r exactly; p cancels
        diff = Fraction(params.alpha) - (1 - Fraction(1) / Fraction(r))
        exact = True
    elif _all_rational(r, p, beta):
        diff = Fraction(beta) + Fraction(p) / Fraction(r)
        exact = True
    else:
        diff = float(beta) + float(p) / float(r)
        exact = False
    if exact:
        on_boundary = diff == 0
    else:
        on_boundary = abs(diff) <= 1e-12
        if on_boundary and diff != 0:
            msg = f"beta = -p/r decided within tolerance 1e-12 (difference {diff:.3g})"
            notes.append(msg)
            warnings.warn(msg, stacklevel=2)
    if on_boundary:
        return RegimeReport("boundary", MomentQuery(float(r) / float(p), True), tuple(notes))
    if diff < 0:
        notes.append(HEAVY_EXPONENT_NOTE)
        q = (float(r) - 1) / (float(p) + float(beta))
        return RegimeReport("heavy", MomentQuery(q, False), tuple(notes))
    return RegimeReport("light", MomentQuery(float(r) / float(p), False), tuple(notes))


@dataclass(frozen=True)
class WeightBand:
    min_ratio: float
    max_ratio: float


def corollary_weight_equivalence(alpha: float, p: float, n: int) -> WeightBand:
    """Range of a_ni / ((n-i)^(p(alpha-1)) n^(-p alpha)) over i = 0..n-1 for Cesaro weights."""
    if n < 2:
        raise ContractError("n must be at least 2")
    scheme = WeightScheme("cesaro", p, alpha=alpha)
    i = np.arange(0, n, dtype=float)
    ref = (n - i) ** (p * (alpha - 1)) * float(n) ** (-p * alpha)
    ratio = weight_row(scheme, n) / ref
    return WeightBand(float(ratio.min()), float(ratio.max()))
