"""Command-line front end.

    subexp axioms --cases 500 --seed 1
    subexp lemma --id 4 --cases 100 --seed 7
    subexp classify --r 2 --p 1 --beta 0
    subexp cesaro --alpha 1 --n 2
    subexp series-run config.toml --out series.csv --plot

Exit codes: 0 ok, 1 runtime error or failed check, 2 indeterminate, 64 usage.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import shlex
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .ambiguity import DEFAULT_BUDGET, Payoff, PengSequenceModel, check_axioms, random_ambiguity_set, sequence_upper_expectation
from .choquet import ParetoCurve, lemma1_check
from .errors import ConfigError, ContractError, EvaluationError, ResourceError
from .experiments import SCHEMA_VERSION, equivalence_report, load_config, report_to_json, series_csv
from .lemmas import lemma2_check, lemma2b_ratio, lemma3_ratio, lemma4_check, random_centered_model, random_model
from .oracles import policy_enumeration_expectation
from .truncation import TruncationParams, decompose
from .weights import RegimeParams, cesaro_coeff, regime_classify

EXIT_OK, EXIT_ERROR, EXIT_INDETERMINATE, EXIT_USAGE = 0, 1, 2, 64

AXIOM_TOL = 1e-10
ORACLE_TOL = 1e-10

# (a, alpha, gamma, beta): target exponent (beta+1)/gamma + alpha on both sides of a
LEMMA1_GRID = (
    (3.0, 1.0, 1.0, 0.5), (3.0, 1.0, 1.0, -0.5), (3.0, 0.5, 2.0, 1.0), (3.0, 2.0, 1.0, 0.5),
    (3.0, 1.0, 0.5, 0.5), (2.5, 1.0, 1.0, 0.0), (2.5, 0.5, 1.0, 0.5), (2.5, 1.5, 1.0, 0.5),
    (2.5, 1.0, 2.0, 0.5), (2.5, 1.0, 1.0, 1.0), (4.0, 1.0, 1.0, 1.5), (4.0, 2.0, 1.0, 1.5),
    (4.0, 1.0, 2.0, 3.0), (4.0, 1.0, 2.0, 6.0), (1.5, 0.5, 1.0, -0.5), (1.5, 1.0, 1.0, 1.0),
    (2.0, 0.5, 2.0, 1.0), (2.0, 1.0, 1.0, 0.5), (3.5, 1.0, 1.0, 1.0), (3.5, 2.0, 1.0, 1.0),
)


class UsageParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _axiom_payoffs():
    return [
        Payoff(lambda x: x, vectorized=True),
        Payoff(lambda x: -x, vectorized=True),
        Payoff(lambda x: x**2, vectorized=True),
        Payoff(lambda x: np.abs(x), vectorized=True),
        Payoff(lambda x: np.minimum(x, 0.5), vectorized=True),
        Payoff(lambda x: np.sin(x), vectorized=True),
        Payoff(lambda x: (x > 0).astype(float), vectorized=True),
    ]


def run_axioms(args):
    rng = np.random.default_rng(args.seed)
    suite = _axiom_payoffs()
    lambdas = [0.0, 0.5, 1.0, 2.0, 7.5]
    rows = []
    for case in range(args.cases):
        amb = random_ambiguity_set(rng, 4, 5)
        rep = check_axioms(amb, suite, lambdas)
        rows.append({"case": case, "members": len(amb), "atoms": len(amb.support), "max_violation": rep.max_violation})
    worst = max((r["max_violation"] for r in rows), default=0.0)
    ok = worst <= AXIOM_TOL
    summary = {"cases": args.cases, "max_violation": worst, "passed": ok}
    print(f"axioms: {args.cases} sets, max violation {worst:.3g} ({'ok' if ok else 'FAILED'})")
    return rows, summary, EXIT_OK if ok else EXIT_ERROR


def _lemma1_rows(args, log_weighted):
    rows = []
    for a, alpha, gamma, beta in LEMMA1_GRID[: args.cases]:
        res = lemma1_check(ParetoCurve(a), alpha, gamma, beta, log_weighted=log_weighted)
        target = (beta + 1) / gamma + alpha
        rows.append({
            "a": a, "alpha": alpha, "gamma": gamma, "beta": beta, "target": target,
            "lhs_partial": res.lhs_partial, "rhs_divergent": res.rhs.divergent, "verdict": res.verdict,
        })
    return rows, all(r["verdict"] == "consistent" for r in rows)


def run_lemma(args):
    rng = np.random.default_rng(args.seed)
    budget = args.budget
    rows = []
    if args.id in ("1i", "1ii"):
        rows, ok = _lemma1_rows(args, args.id == "1ii")
        summary = {"cases": len(rows), "passed": ok}
        print(f"lemma {args.id}: {len(rows)} grid points, {'all consistent' if ok else 'INCONSISTENT'}")
        return rows, summary, EXIT_OK if ok else EXIT_ERROR
    for case in range(args.cases):
        if args.id == "4":
            model = random_model(rng)
            xs = np.sort(rng.uniform(0.05, 3.0, size=5))
            for x in xs:
                chk = lemma4_check(model, float(x), budget)
                rows.append({"case": case, "n": model.length, "param": float(x), "lhs": chk.lhs, "rhs": chk.rhs,
                             "ratio": chk.ratio, "holds": chk.holds})
            continue
        model = random_centered_model(rng)
        if args.id == "2a":
            checks = [(p, lemma2_check(model, p, budget)) for p in (1.0, 1.5, 2.0)]
        elif args.id == "2b":
            checks = [(p, lemma2b_ratio(model, p, budget)) for p in (2.0, 3.0)]
        else:
            checks = [(M, lemma3_ratio(model, M, budget)) for M in (2.0, 3.0)]
        for param, chk in checks:
            rows.append({"case": case, "n": model.length, "param": param, "lhs": chk.lhs, "rhs": chk.rhs,
                         "ratio": chk.ratio, "holds": chk.holds})
    ratios = [r["ratio"] for r in rows]
    max_ratio = max(ratios, default=0.0)
    ok = all(r["holds"] for r in rows) and math.isfinite(max_ratio)
    summary = {"cases": args.cases, "checks": len(rows), "max_ratio": max_ratio, "passed": ok}
    print(f"lemma {args.id}: {len(rows)} checks, max ratio {max_ratio:.4g} ({'ok' if ok else 'FAILED'})")
    return rows, summary, EXIT_OK if ok else EXIT_ERROR


def run_decompose(args):
    rng = np.random.default_rng(args.seed)
    params = TruncationParams(args.delta, args.K, args.eps, args.n)
    t, b = params.clip, params.big
    draws = list(rng.uniform(-4 * max(b, t), 4 * max(b, t), size=args.draws))
    draws += [t, -t, b, -b]
    rows = []
    bad_identity = bad_support = 0
    for ax in draws:
        d = decompose(ax, params)
        exact = d.x1 + d.x2 + d.x3 + d.x4 == ax
        disjoint = sum(v != 0 for v in (d.x2, d.x3, d.x4)) <= 1
        bad_identity += not exact
        bad_support += not disjoint
        rows.append({"ax": ax, "x1": d.x1, "x2": d.x2, "x3": d.x3, "x4": d.x4, "exact": exact, "disjoint": disjoint})
    ok = bad_support == 0 and bad_identity == 0
    summary = {"draws": len(draws), "identity_failures": bad_identity, "support_failures": bad_support,
               "clip": t, "big": b, "passed": ok}
    print(f"decompose-check: {len(draws)} draws, t={t:.6g}, eps/K={b:.6g}, "
          f"{bad_identity} inexact sums, {bad_support} overlapping pieces")
    return rows, summary, EXIT_OK if ok else EXIT_ERROR


def _number(text: str):
    """Parse as an exact Fraction when the literal is a plain decimal."""
    try:
        return Fraction(text)
    except ValueError:
        return float(text)


def run_classify(args):
    r, p = _number(args.r), _number(args.p)
    if args.alpha is not None:
        params = RegimeParams.from_cesaro(r, p, _number(args.alpha))
    else:
        params = RegimeParams(r, p, _number(args.beta))
    report = regime_classify(params)
    print(report.describe())
    for note in report.notes:
        print(f"note: {note}")
    row = {"regime": report.regime, "exponent": report.exponent, "log_factor": report.moment_query.log_factor}
    return [row], {**row, "notes": list(report.notes)}, EXIT_OK


def run_cesaro(args):
    alpha = _number(args.alpha)
    value = cesaro_coeff(alpha, args.n)
    print(value if isinstance(value, Fraction) and value.denominator == 1 else f"{float(value):.17g}")
    row = {"alpha": float(alpha), "n": args.n, "value": float(value)}
    return [row], row, EXIT_OK


def run_oracle_compare(args):
    rng = np.random.default_rng(args.seed)
    rows = []
    for case in range(args.cases):
        # a shared support keeps the policy tree enumerable
        amb = random_ambiguity_set(rng, 3, 3, common_support=True)
        model = PengSequenceModel(amb, int(rng.integers(1, 4)))
        n = model.length
        coef = rng.normal(size=n)
        payoff = Payoff(lambda x, c=coef: np.sin(x @ c) + np.abs(x).max(axis=1), arity=n, vectorized=True)
        dp = sequence_upper_expectation(model, payoff, args.budget)
        brute = policy_enumeration_expectation(model, payoff)
        rows.append({"case": case, "n": n, "members": len(model.marginal), "dp": dp, "enumeration": brute,
                     "abs_diff": abs(dp - brute)})
    worst = max((r["abs_diff"] for r in rows), default=0.0)
    ok = worst <= ORACLE_TOL
    summary = {"cases": args.cases, "max_abs_diff": worst, "passed": ok}
    print(f"oracle-compare: {args.cases} models, max |dp - enumeration| {worst:.3g} ({'ok' if ok else 'FAILED'})")
    return rows, summary, EXIT_OK if ok else EXIT_ERROR


def run_series_cmd(args):
    config = load_config(args.config)
    if args.seed_given:
        config = replace(config, seed=args.seed)
    if args.budget_given:
        config = replace(config, budget=args.budget)
    report = equivalence_report(config, workers=args.workers)
    for s in report.series.summaries:
        tail = "n/a" if s.cauchy_tail is None else f"{s.cauchy_tail:.3g}"
        print(f"eps={s.eps:g}: partial sum {s.partial_sum:.6g}, last block {tail} -> {s.verdict}")
    m = report.moment
    print(f"moment side: {m.regime.describe()} -> {m.verdict}")
    consistent = {True: "consistent", False: "INCONSISTENT", None: "indeterminate"}[report.consistent]
    print(f"series {report.series.verdict}, moment {m.verdict}: {consistent}")
    for c in report.caveats:
        print(f"caveat: {c}")
    if args.plot:
        if args.out is None:
            raise ContractError("--plot needs --out to place the figure")
        from .plotting import emit_plotdata, render_series

        base = Path(args.out)
        emit_plotdata(report.series, base.with_name(base.stem + "_plotdata.csv"))
        render_series(report.series, base.with_suffix(".png"))
    code = EXIT_ERROR if report.consistent is False else report.exit_code
    return report, config, code


COMMANDS = {
    "axioms": run_axioms,
    "lemma": run_lemma,
    "decompose-check": run_decompose,
    "classify": run_classify,
    "cesaro": run_cesaro,
    "oracle-compare": run_oracle_compare,
    "series-run": run_series_cmd,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default 0; overrides config for series-run)")
    common.add_argument("--out", default=None, help="write machine-readable output here")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--budget", type=int, default=None, help=f"state/leaf budget (default {DEFAULT_BUDGET})")

    parser = UsageParser(prog="subexp", description="Sublinear-expectation numerics and series experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("axioms", parents=[common], help="axiom suite on random ambiguity sets")
    p.add_argument("--cases", type=int, default=500)

    p = sub.add_parser("lemma", parents=[common], help="exact small-scale inequality suites")
    p.add_argument("--id", required=True, choices=("1i", "1ii", "2a", "2b", "3", "4"))
    p.add_argument("--cases", type=int, default=100)

    p = sub.add_parser("decompose-check", parents=[common], help="four-piece truncation identity on random draws")
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--delta", type=float, default=0.375)
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--eps", type=float, default=1.0)

    p = sub.add_parser("classify", parents=[common], help="moment regime for (r, p, beta) or Cesaro alpha")
    p.add_argument("--r", required=True)
    p.add_argument("--p", required=True)
    shape = p.add_mutually_exclusive_group(required=True)
    shape.add_argument("--beta", default=None)
    shape.add_argument("--alpha", default=None, help="Cesaro order; sets beta = p(alpha - 1)")

    p = sub.add_parser("cesaro", parents=[common], help="Cesaro coefficient A_n^alpha")
    p.add_argument("--alpha", required=True)
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("oracle-compare", parents=[common], help="backward recursion vs policy enumeration")
    p.add_argument("--cases", type=int, default=200)

    p = sub.add_parser("series-run", parents=[common], help="series vs moment experiment from a config file")
    p.add_argument("config", help="JSON or TOML experiment config")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--plot", action="store_true", help="also render a PNG and plot data next to --out")
    return parser


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _write_output(args, invocation, result):
    if args.command == "series-run":
        report, config, _ = result
        if args.format == "csv":
            Path(args.out).write_text(series_csv(report.series))
        else:
            payload = report_to_json(report, config)
            payload["invocation"] = invocation
            Path(args.out).write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")
        return
    rows, summary, _ = result
    if args.format == "csv":
        _write_rows(args.out, rows)
    else:
        payload = {"schema": SCHEMA_VERSION, "kind": args.command, "invocation": invocation,
                   "summary": summary, "results": rows}
        Path(args.out).write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.seed_given = args.seed is not None
    args.budget_given = args.budget is not None
    if args.seed is None:
        args.seed = 0
    if args.budget is None:
        args.budget = DEFAULT_BUDGET
    invocation = "subexp " + shlex.join(argv)
    if args.command != "series-run" and not args.seed_given:
        invocation += f" --seed {args.seed}"
    print(f"# {invocation}")
    try:
        result = COMMANDS[args.command](args)
        if args.out is not None:
            _write_output(args, invocation, result)
    except (ContractError, EvaluationError, ResourceError, ConfigError, OSError) as exc:
        print(f"subexp: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return result[-1]


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
