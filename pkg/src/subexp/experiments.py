"""Desk-scale probes of the series/moment equivalence.

One side is the complete-convergence series

    sum_n n^(r-2) V(max_j |sum_{i<=j} a_ni X_i| > eps),

sampled on a doubling grid of n; the other is the Choquet moment condition
picked by :func:`subexp.weights.regime_classify`.  Neither side can be
certified from finitely many terms, so the series verdict is a pre-registered
comparative rule against a bounded reference marginal.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .ambiguity import (
    DEFAULT_BUDGET,
    FAIR_COIN,
    AmbiguitySet,
    FiniteDistribution,
    PengSequenceModel,
    lower_mean,
    max_partial_sum_capacity,
    upper_mean,
)
from .choquet import ChoquetValue, MomentQuery, ParetoCurve, StepCurve, choquet_moment
from .errors import ConfigError, ContractError
from .weights import RegimeParams, RegimeReport, WeightScheme, regime_classify, weight_row

SCHEMA_VERSION = 1
CSV_COLUMNS = ("n", "eps", "capacity", "stderr", "term", "partial_sum")
SEED_ENV = "SUBEXP_SEED"

DEFAULT_N_GRID = (16, 32, 64, 128, 256, 512)
DEFAULT_EPS = (0.1, 0.5, 1.0)
DEFAULT_REPLICATES = 200

CONVERGENT = "convergent-consistent"
DIVERGENT = "divergent-consistent"
INCONCLUSIVE = "inconclusive"

# verdict rule constants
CAUCHY_FRACTION = 0.01
DIVERGENCE_MARGIN = 10.0

DESK_SCALE_CAVEAT = (
    "desk-scale numerical evidence on a finite n grid; this does not prove "
    "convergence or divergence of the series"
)


@dataclass(frozen=True)
class HeavyTailMarginal:
    """Symmetric atoms at +-scale 2^k, k = 0..m, with P(|X| = scale 2^k) proportional to 2^(-a k).

    The tail P(|X| > x) then behaves like x^(-a) up to the cutoff scale 2^m.
    """

    a: float
    m: int = 16
    scale: float = 1.0

    def __post_init__(self):
        if not self.a > 0 or self.m < 0 or not self.scale > 0:
            raise ContractError("heavy-tail marginal needs a > 0, m >= 0, scale > 0")

    @property
    def cutoff(self) -> float:
        return self.scale * 2.0**self.m

    def ambiguity(self) -> AmbiguitySet:
        k = np.arange(self.m + 1)
        w = 2.0 ** (-self.a * k)
        w = w / w.sum() / 2
        atoms = [(self.scale * 2.0**j, p) for j, p in zip(k, w)]
        atoms += [(-v, p) for v, p in atoms]
        return AmbiguitySet.of(FiniteDistribution.from_atoms(atoms))

    def curve(self) -> ParetoCurve:
        """Untruncated Pareto analogue used for the moment side."""
        return ParetoCurve(self.a, self.scale)

    def to_json(self) -> dict:
        return {"kind": "heavy_tail", "a": self.a, "m": self.m, "scale": self.scale}


def marginal_from_json(obj):
    if isinstance(obj, dict) and obj.get("kind") == "heavy_tail":
        return HeavyTailMarginal(float(obj["a"]), int(obj.get("m", 16)), float(obj.get("scale", 1.0)))
    return AmbiguitySet.from_json(obj)


def marginal_ambiguity(marginal) -> AmbiguitySet:
    return marginal.ambiguity() if isinstance(marginal, HeavyTailMarginal) else marginal


@dataclass(frozen=True)
class ExperimentConfig:
    regime: RegimeParams
    scheme: WeightScheme
    marginal: object
    eps_list: tuple = DEFAULT_EPS
    n_grid: tuple = DEFAULT_N_GRID
    method: str = "exact_dp"
    replicates: int = DEFAULT_REPLICATES
    seed: int | None = None
    budget: int = DEFAULT_BUDGET
    scenarios: int = 8

    def __post_init__(self):
        object.__setattr__(self, "eps_list", tuple(float(e) for e in self.eps_list))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if not self.eps_list or any(not e > 0 for e in self.eps_list):
            raise ContractError("eps_list must be a nonempty list of positive reals")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ContractError("n_grid must be a nonempty list of positive integers")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ContractError("n_grid must be increasing")
        if self.method not in ("exact_dp", "mc_grid"):
            raise ContractError(f"unknown method {self.method!r}")
        if self.method == "mc_grid" and self.seed is None:
            raise ContractError("method 'mc_grid' needs a seed")
        if self.replicates < 1:
            raise ContractError("replicates must be positive")
        if abs(self.scheme.p - self.regime.p) > 1e-12 or abs(self.scheme.effective_beta - self.regime.beta) > 1e-12:
            raise ContractError("weight scheme (p, beta) disagrees with the regime parameters")

    def to_json(self) -> dict:
        marginal = self.marginal.to_json()
        return {
            "schema": SCHEMA_VERSION,
            "regime": self.regime.to_json(),
            "scheme": self.scheme.to_json(),
            "marginal": marginal,
            "eps_list": list(self.eps_list),
            "n_grid": list(self.n_grid),
            "method": self.method,
            "replicates": self.replicates,
            "seed": self.seed,
            "budget": self.budget,
            "scenarios": self.scenarios,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a mapping")
        schema = obj.get("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigError(f"field 'schema': unsupported version {schema!r}")
        parsed = {}
        for name, parse in (
            ("regime", RegimeParams.from_json),
            ("scheme", WeightScheme.from_json),
            ("marginal", marginal_from_json),
        ):
            if name not in obj:
                raise ConfigError(f"field {name!r} is required")
            try:
                parsed[name] = parse(obj[name])
            except (ContractError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"field {name!r}: {exc}") from exc
        simple = {
            "eps_list": tuple,
            "n_grid": tuple,
            "method": str,
            "replicates": int,
            "seed": lambda v: None if v is None else int(v),
            "budget": int,
            "scenarios": int,
        }
        for name, conv in simple.items():
            if name in obj:
                try:
                    parsed[name] = conv(obj[name])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"field {name!r}: {exc}") from exc
        unknown = set(obj) - set(parsed) - {"schema"}
        if unknown:
            raise ConfigError(f"unknown field(s): {', '.join(sorted(unknown))}")
        try:
            return cls(**parsed)
        except ContractError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    """Read a JSON or TOML config; ``SUBEXP_SEED`` overrides the seed."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        try:
            obj = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            obj["seed"] = int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from exc
    return ExperimentConfig.from_json(obj)


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_json(), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- estimation


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def mc_grid_capacity(
    amb: AmbiguitySet,
    weights: np.ndarray,
    eps: float,
    replicates: int,
    seed: int,
    n_key: int,
    eps_key: int,
    scenarios: int = 8,
):
    """Lower estimate of V(max_j |sum a X| > eps) over static member assignments.

    Scenarios are the constant assignments (one per member) plus ``scenarios``
    random index-to-member assignments.  Each scenario is a classical product
    law, so its exceedance frequency estimates a probability below the
    adaptive supremum.  Returns ``(estimate, stderr)`` for the best scenario.
    """
    n = len(weights)
    M = len(amb)
    support = amb.support
    cdf = np.cumsum(amb.prob_matrix, axis=1)
    cdf[:, -1] = 1.0
    assign = [np.full(n, m) for m in range(M)]
    if M > 1 and scenarios > 0:
        srng = _rng(seed, n_key, eps_key, 0, 1)
        assign += list(srng.integers(0, M, size=(scenarios, n)))
    assign = np.array(assign)  # (S, n)
    member_cdf = cdf[assign]  # (S, n, s)
    hits = np.zeros(len(assign))
    for rep in range(replicates):
        u = _rng(seed, n_key, eps_key, rep, 0).random((len(assign), n))
        idx = np.sum(u[:, :, None] >= member_cdf, axis=2)
        x = support[np.minimum(idx, len(support) - 1)]
        partial = np.cumsum(weights[None, :] * x, axis=1)
        hits += np.max(np.abs(partial), axis=1) > eps
    freq = hits / replicates
    best = int(np.argmax(freq))
    f = float(freq[best])
    return f, math.sqrt(f * (1 - f) / replicates)


def _cell(args):
    """One (n, eps) cell; module-level so process pools can pickle it."""
    config, n, eps_index = args
    amb = marginal_ambiguity(config.marginal)
    weights = weight_row(config.scheme, n)
    eps = config.eps_list[eps_index]
    if config.method == "exact_dp":
        cap = max_partial_sum_capacity(PengSequenceModel(amb, n), weights, eps, budget=config.budget)
        return cap, 0.0
    return mc_grid_capacity(amb, weights, eps, config.replicates, config.seed, n, eps_index, config.scenarios)


@dataclass(frozen=True)
class SeriesRow:
    n: int
    eps: float
    capacity: float
    stderr: float
    term: float
    partial_sum: float


@dataclass(frozen=True)
class EpsSummary:
    eps: float
    partial_sum: float
    cauchy_tail: float | None
    verdict: str
    reference_tail: float | None = None


@dataclass(frozen=True)
class SeriesDiagnostics:
    """Terms, block partial sums and verdicts of the series, one row per (n, eps).

    Partial sums weight the term at n_k by the block width n_k - n_{k-1}
    (n_{-1} = 0): each sampled term stands in for the block of n it closes.
    ``cauchy_tail`` is the last block's contribution.
    """

    rows: tuple
    summaries: tuple
    verdict: str

    def per_eps(self, eps: float):
        return [row for row in self.rows if row.eps == eps]


def _assemble(config: ExperimentConfig, caps) -> list:
    r = config.regime.r
    rows = []
    for e_idx, eps in enumerate(config.eps_list):
        partial = 0.0
        prev_n = 0
        for n in config.n_grid:
            cap, se = caps[(n, e_idx)]
            term = float(n) ** (r - 2) * cap
            partial += (n - prev_n) * term
            prev_n = n
            rows.append(SeriesRow(n, eps, cap, se, term, partial))
    return rows


def _compute_caps(config: ExperimentConfig, workers: int) -> dict:
    cells = [(config, n, e) for e in range(len(config.eps_list)) for n in config.n_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell, cells))
    else:
        results = [_cell(c) for c in cells]
    return {(n, e): res for (_, n, e), res in zip(cells, results)}


def _tails(rows, config):
    out = {}
    for eps in config.eps_list:
        sel = [row for row in rows if row.eps == eps]
        if len(sel) < 2:
            out[eps] = None
            continue
        # block width times term, not a difference of partial sums, so a
        # tiny last block is not lost to cancellation
        out[eps] = (sel[-1].n - sel[-2].n) * sel[-1].term
    return out


def reference_config(config: ExperimentConfig) -> ExperimentConfig:
    """Same regime, weights, grids and seed with the bounded fair-coin marginal."""
    return replace(config, marginal=AmbiguitySet.of(FAIR_COIN))


def run_series(config: ExperimentConfig, workers: int = 1, reference: SeriesDiagnostics | None = None) -> SeriesDiagnostics:
    """Evaluate the series on the grid and classify it per eps.

    convergent-consistent: the last block adds at most 1% of the partial sum
    and the terms do not increase over the last two doublings.
    divergent-consistent: otherwise, when the last block exceeds ten times the
    bounded reference's last block under the same settings.
    Fewer than three grid points is always inconclusive.
    """
    rows = _assemble(config, _compute_caps(config, workers))
    tails = _tails(rows, config)
    pending = []
    verdicts = {}
    for eps in config.eps_list:
        sel = [row for row in rows if row.eps == eps]
        if len(sel) < 3:
            verdicts[eps] = INCONCLUSIVE
            continue
        t = [row.term for row in sel[-3:]]
        if tails[eps] <= CAUCHY_FRACTION * sel[-1].partial_sum and t[2] <= t[1] <= t[0]:
            verdicts[eps] = CONVERGENT
        else:
            pending.append(eps)
    ref_tails = {}
    if pending:
        if reference is None:
            reference = run_series(reference_config(config), workers, reference=_SENTINEL)
        if reference is not _SENTINEL:
            ref_tails = _tails(reference.rows, config)
        for eps in pending:
            ref = ref_tails.get(eps)
            if ref is not None and tails[eps] > DIVERGENCE_MARGIN * ref and tails[eps] > 0:
                verdicts[eps] = DIVERGENT
            else:
                verdicts[eps] = INCONCLUSIVE
    summaries = tuple(
        EpsSummary(
            eps,
            [row for row in rows if row.eps == eps][-1].partial_sum,
            tails[eps],
            verdicts[eps],
            ref_tails.get(eps),
        )
        for eps in config.eps_list
    )
    values = [s.verdict for s in summaries]
    if all(v == CONVERGENT for v in values):
        overall = CONVERGENT
    elif any(v == DIVERGENT for v in values):
        overall = DIVERGENT
    else:
        overall = INCONCLUSIVE
    return SeriesDiagnostics(tuple(rows), summaries, overall)


# marks the reference run itself so it does not look for its own reference
_SENTINEL = SeriesDiagnostics((), (), INCONCLUSIVE)


# --------------------------------------------------------------- moment side


@dataclass(frozen=True)
class MomentSide:
    regime: RegimeReport
    query: MomentQuery
    value: ChoquetValue
    caveats: tuple = ()

    @property
    def verdict(self) -> str:
        return "divergent" if self.value.divergent else "finite"


def moment_side(config: ExperimentConfig) -> MomentSide:
    report = regime_classify(config.regime)
    query = report.moment_query
    caveats = list(report.notes)
    if isinstance(config.marginal, HeavyTailMarginal):
        curve = config.marginal.curve()
        caveats.append(
            f"series side uses the heavy-tail law truncated at {config.marginal.cutoff:g}, which has "
            f"every moment; the moment side is evaluated on the untruncated Pareto analogue "
            f"(index {config.marginal.a:g})"
        )
    else:
        curve = StepCurve.from_ambiguity(config.marginal)
    return MomentSide(report, query, choquet_moment(curve, query), tuple(caveats))


@dataclass(frozen=True)
class EquivalenceReport:
    series: SeriesDiagnostics
    moment: MomentSide
    consistent: bool | None
    caveats: tuple

    @property
    def exit_code(self) -> int:
        return 2 if self.consistent is None else 0


def equivalence_report(config: ExperimentConfig, workers: int = 1) -> EquivalenceReport:
    series = run_series(config, workers)
    moment = moment_side(config)
    caveats = [DESK_SCALE_CAVEAT, *moment.caveats]
    if config.regime.p <= 1:
        amb = marginal_ambiguity(config.marginal)
        if abs(upper_mean(amb)) > 1e-12 or abs(lower_mean(amb)) > 1e-12:
            caveats.append("marginal violates E[X] = -E[-X] = 0, which the equivalence assumes for p <= 1")
    if config.method == "mc_grid":
        caveats.append("capacities are static-scenario lower estimates of the adaptive supremum")
    if series.verdict == INCONCLUSIVE:
        consistent = None
        caveats.append("series verdict is inconclusive, so consistency is indeterminate")
    elif moment.verdict == "finite":
        consistent = series.verdict == CONVERGENT
    else:
        consistent = series.verdict == DIVERGENT
    return EquivalenceReport(series, moment, consistent, tuple(caveats))


# --------------------------------------------------------------- persistence


def _fmt(x: float) -> str:
    return repr(float(x))


def series_csv(diag: SeriesDiagnostics) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in diag.rows:
        writer.writerow([row.n, _fmt(row.eps), _fmt(row.capacity), _fmt(row.stderr), _fmt(row.term), _fmt(row.partial_sum)])
    return buf.getvalue()


def write_series_csv(diag: SeriesDiagnostics, path) -> None:
    Path(path).write_text(series_csv(diag))


def read_series_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ConfigError(f"{path}: expected columns {','.join(CSV_COLUMNS)}")
        return [
            SeriesRow(int(r["n"]), float(r["eps"]), float(r["capacity"]), float(r["stderr"]),
                      float(r["term"]), float(r["partial_sum"]))
            for r in reader
        ]


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def series_to_json(diag: SeriesDiagnostics) -> dict:
    return {
        "verdict": diag.verdict,
        "rows": [{k: _jsonable(getattr(r, k)) for k in CSV_COLUMNS} for r in diag.rows],
        "summaries": [
            {
                "eps": s.eps,
                "partial_sum": s.partial_sum,
                "cauchy_tail": s.cauchy_tail,
                "verdict": s.verdict,
                "reference_tail": s.reference_tail,
            }
            for s in diag.summaries
        ],
    }


def report_to_json(report: EquivalenceReport, config: ExperimentConfig | None = None) -> dict:
    m = report.moment
    out = {
        "schema": SCHEMA_VERSION,
        "kind": "equivalence_report",
        "series": series_to_json(report.series),
        "moment": {
            "regime": m.regime.regime,
            "exponent": m.query.q,
            "log_factor": m.query.log_factor,
            "verdict": m.verdict,
            "value": _jsonable(m.value.value),
            "error": _jsonable(m.value.error),
            "cutoff": _jsonable(m.value.cutoff),
        },
        "consistent": report.consistent,
        "caveats": list(report.caveats),
    }
    if config is not None:
        out["config"] = config.to_json()
    return out


def write_report_json(report: EquivalenceReport, path, config: ExperimentConfig | None = None) -> None:
    Path(path).write_text(json.dumps(report_to_json(report, config), indent=2, sort_keys=True) + "\n")


def persist(obj, path, config: ExperimentConfig | None = None) -> None:
    """Write diagnostics as CSV or a report as JSON, by type."""
    if isinstance(obj, SeriesDiagnostics):
        write_series_csv(obj, path)
    elif isinstance(obj, EquivalenceReport):
        write_report_json(obj, path, config)
    else:
        raise ContractError(f"cannot persist {type(obj).__name__}")
