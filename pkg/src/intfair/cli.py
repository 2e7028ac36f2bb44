"""Command-line front end.

    intfair audit data.csv --attrs sex,race --pred yhat --out reports/
    intfair bounds --fixture CE8 --delta 0.1 --chernoff
    intfair partition data.csv --attrs a,b,c --pred yhat --tau 10
    intfair synth --d 3 --seed 7 --n 1000 --out synth/
    intfair bench --fixture CE8 --n-grid 100,1000,10000 --reps 20 --out bench/

Reports are JSON with floats rounded to 10 significant digits.  Errors are
written to stderr as JSON; exit codes: 0 ok, 2 input error, 3 infeasible
precondition, 4 cell budget exceeded.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .bench import bound_comparison, convergence_experiment, default_estimators, parse_estimator
from .bounds import SolverConfig, bound_report
from .errors import AuditError, ParameterError
from .infomeasures import moment_summary
from .metrics import DEFAULT_CELL_BUDGET, MetricVariant, independent_approx, u_distribution, unfairness_report
from .partitioning import greedy_partition
from .pmf_core import (
    AttributeSchema,
    JointPMF,
    Partition,
    empirical_pmf,
    load_pmf,
    load_schema,
    read_csv_table,
    smoothed_pmf,
)
from .synth import RngSpec, dirichlet_pmf, fixture, sample_table

SIG = 10


def _round(obj):
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float("%.*g" % (SIG, x))
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj):
    return json.dumps(_round(obj), indent=2, ensure_ascii=False) + "\n"


def fmt(x):
    if isinstance(x, (float, np.floating)):
        return "%.*g" % (SIG, x)
    return str(x)


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write(out_dir, name, text):
    if out_dir is None:
        sys.stdout.write(text)
        return
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _envelope(command, args, inputs):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command", "out")}
    return {
        "tool": "intfair",
        "version": __version__,
        "command": command,
        "config": cfg,
        "inputs": {os.path.basename(p): sha256(p) for p in inputs},
    }


def _columns(text):
    cols = [c.strip() for c in text.split(",") if c.strip()]
    if not cols:
        raise ParameterError("no attribute columns given")
    return cols


def _load_table(args):
    schema = load_schema(args.schema) if args.schema else None
    return read_csv_table(args.csv, _columns(args.attrs), args.pred, schema, args.count_column)


def _load_pmf(args):
    """pmf from --pmf, --fixture or an empirical CSV; returns (pmf, input paths)."""
    if getattr(args, "pmf", None):
        return load_pmf(args.pmf), [args.pmf]
    if getattr(args, "fixture", None):
        return fixture(args.fixture), []
    if getattr(args, "csv", None):
        table = _load_table(args)
        pmf = empirical_pmf(table) if args.alpha is None else smoothed_pmf(table, args.alpha)
        return pmf, [args.csv] + ([args.schema] if args.schema else [])
    raise ParameterError("give a CSV, --pmf or --fixture")


def _solver(args):
    return SolverConfig(n_splits=args.n_splits)


def _estimate_block(pmf, args):
    U = u_distribution(pmf, args.variant, args.cell_budget)  # budget overrun is fatal (exit 4)
    rep = unfairness_report(pmf, args.variant, args.positive_label, args.cell_budget).to_json()
    rep["eps_star"] = U.quantile(args.delta)
    rep["tail_at_eps_star"] = U.tail(rep["eps_star"])
    return rep


def cmd_audit(args):
    table = _load_table(args)
    emp = empirical_pmf(table)
    report = _envelope("audit", args, [args.csv] + ([args.schema] if args.schema else []))
    report["schema"] = table.schema.to_json()
    report["n"] = table.n
    report["empirical"] = _estimate_block(emp, args)
    report["smoothed"] = _estimate_block(smoothed_pmf(table, args.alpha), args)
    q = Partition.singletons(emp.d)
    try:
        greedy = greedy_partition(table, args.tau)
    except AuditError as exc:
        report["partitioned"] = {"status": "infeasible", "reason": str(exc), "cell": getattr(exc, "cell", None)}
    else:
        q = greedy.q_star
        part = greedy.to_json()
        try:
            part["u_ind_q_star"] = independent_approx(emp, q, args.variant)
        except AuditError as exc:
            part["u_ind_q_star"] = None
            part["flags"] = {"u_ind_q_star": {"status": "infinite", "reason": str(exc)}}
        report["partitioned"] = part
    report["moments"] = moment_summary(emp, q).to_json()
    report["bounds"] = bound_report(emp, q, args.delta, args.variant, args.chernoff and args.delta < 1, _solver(args)).to_json()
    _write(args.out, "audit.json", dumps(report))
    return 0


def cmd_bounds(args):
    pmf, inputs = _load_pmf(args)
    q = Partition.parse(args.partition) if args.partition else Partition.singletons(pmf.d)
    report = _envelope("bounds", args, inputs)
    rep = bound_report(pmf, q, args.delta, args.variant, args.chernoff and args.delta < 1, _solver(args))
    report["bounds"] = rep.to_json()
    report["eps_star"] = u_distribution(pmf, args.variant, args.cell_budget).quantile(args.delta)
    _write(args.out, "bounds.json", dumps(report))
    return 0


def cmd_partition(args):
    table = _load_table(args)
    greedy = greedy_partition(table, args.tau)  # precondition failure exits 3
    report = _envelope("partition", args, [args.csv] + ([args.schema] if args.schema else []))
    report["result"] = greedy.to_json()
    report["u_ind_q_star"] = independent_approx(empirical_pmf(table), greedy.q_star, args.variant)
    _write(args.out, "partition.json", dumps(report))
    return 0


def _table_csv(table):
    schema = table.schema
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(schema.attr_names) + [schema.label_name, "count"])
    for idx in np.ndindex(*schema.shape):
        vals = [schema.attr_values[k][i] for k, i in enumerate(idx[:-1])]
        w.writerow(vals + [schema.label_values[idx[-1]], int(table.counts[idx])])
    return buf.getvalue()


def cmd_synth(args):
    rng = RngSpec(args.seed)
    if args.fixture:
        pmf = fixture(args.fixture)
    else:
        schema = AttributeSchema(
            tuple("A%d" % (k + 1) for k in range(args.d)), (args.card,) * args.d, args.label_card
        )
        pmf = dirichlet_pmf(schema, args.concentration, rng.child("pmf"))
    report = _envelope("synth", args, [])
    report["pmf"] = pmf.to_json()
    # the pmf must round-trip exactly, so it is not rounded
    text = json.dumps(report, indent=2) + "\n"
    _write(args.out, "pmf.json", text)
    if args.n:
        _write(args.out, "table.csv", _table_csv(sample_table(pmf, args.n, rng.child("table"))))
    return 0


def _grid(text):
    try:
        return [int(float(x)) for x in text.split(",")]
    except ValueError:
        raise ParameterError("bad n-grid %r" % text) from None


def cmd_bench(args):
    rng = RngSpec(args.seed)
    inputs = []
    if args.pmf:
        truths, inputs = [load_pmf(args.pmf)], [args.pmf]
    elif args.fixture:
        truths = [fixture(args.fixture)]
    else:
        schema = AttributeSchema.binary(args.d)
        truths = [dirichlet_pmf(schema, args.concentration, rng.child("truth", i)) for i in range(args.n_truths)]
    ests = [parse_estimator(e) for e in args.estimators.split(";")] if args.estimators else default_estimators(tau=args.tau)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["estimator", "truth_id", "n", "reps", "statistic", "value", "absolute"])
    summary = _envelope("bench", args, inputs)
    summary["curves"] = []
    for i, pmf in enumerate(truths):
        curves = convergence_experiment(pmf, ests, _grid(args.n_grid), args.reps, rng.child("reps", i), args.variant, i)
        for c in curves:
            for row in c.rows():
                w.writerow([fmt(v) for v in row.values()])
            summary["curves"].append(
                {
                    "estimator": c.estimator,
                    "truth_id": i,
                    "truth": c.truth,
                    "absolute_l2": c.absolute,
                    "rel_l2": c.rel_l2.tolist(),
                    "failure_fraction": c.failure_fraction.tolist(),
                    "failures": c.failures[:20],
                }
            )
        if args.chernoff or args.bounds:
            summary.setdefault("bound_comparison", []).append(
                bound_comparison(pmf, args.delta, args.tau, args.selection_n, rng.child("bounds", i), args.chernoff, _solver(args))
            )
    _write(args.out, "bench.csv", buf.getvalue())
    _write(args.out, "bench_summary.json", dumps(summary))
    return 0


def _positive_float(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("not a number: %r" % text) from None
    if not x > 0:
        raise argparse.ArgumentTypeError("must be positive: %r" % text)
    return x


def _delta(text):
    x = _positive_float(text)
    if x > 1:
        raise argparse.ArgumentTypeError("delta must lie in (0, 1]")
    return x


def _variant(text):
    try:
        return MetricVariant.parse(text).value
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common(p, data=True):
    if data:
        p.add_argument("csv", nargs="?" if data == "optional" else None, help="CSV with one row per prediction")
        p.add_argument("--attrs", help="comma-separated protected attribute columns", required=data is True)
        p.add_argument("--pred", default="prediction", help="prediction column (default: prediction)")
        p.add_argument("--count-column", default=None, help="column holding row multiplicities")
        p.add_argument("--schema", default=None, help="JSON schema declaring the alphabets")
    p.add_argument("--delta", type=_delta, default=0.1)
    p.add_argument("--tau", type=int, default=10)
    p.add_argument("--variant", type=_variant, default=MetricVariant.RATIO_LOG.value)
    p.add_argument("--positive-label", default=None)
    p.add_argument("--chernoff", action="store_true", help="also solve for the Chernoff certificate")
    p.add_argument("--n-splits", type=int, default=SolverConfig.n_splits, help="delta split grid size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cell-budget", type=int, default=DEFAULT_CELL_BUDGET)
    p.add_argument("--out", default=None, help="output directory (default: stdout)")


def build_parser():
    ap = argparse.ArgumentParser(prog="intfair", description="Intersectional fairness audit of a classifier.")
    ap.add_argument("--version", action="version", version="intfair " + __version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("audit", help="estimate unfairness, moments and bounds from a CSV")
    _common(p)
    p.add_argument("--alpha", type=_positive_float, default=1.0, help="Dirichlet smoothing")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("bounds", help="tail certificates for a pmf, fixture or CSV")
    _common(p, data="optional")
    p.add_argument("--pmf", default=None)
    p.add_argument("--fixture", default=None)
    p.add_argument("--alpha", type=_positive_float, default=None, help="smooth the CSV estimate")
    p.add_argument("--partition", default=None, help='e.g. "0,1|2" (default: singletons)')
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("partition", help="greedy partition finder")
    _common(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("synth", help="draw a Dirichlet pmf (or a fixture) and sample a table")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--card", type=int, default=2)
    p.add_argument("--label-card", type=int, default=2)
    p.add_argument("--concentration", type=_positive_float, default=1.0)
    p.add_argument("--fixture", default=None)
    p.add_argument("--n", type=int, default=1000, help="sample size (0: pmf only)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="convergence curves and bound comparison")
    _common(p, data=False)
    p.add_argument("--pmf", default=None)
    p.add_argument("--fixture", default=None)
    p.add_argument("--d", type=int, default=3, help="attributes of the Dirichlet truths")
    p.add_argument("--n-truths", type=int, default=1)
    p.add_argument("--concentration", type=_positive_float, default=1.0)
    p.add_argument("--estimators", default=None, help='";"-separated, e.g. "bayes(1);s_star;partitioned(10)"')
    p.add_argument("--n-grid", default="100,1000,10000,100000")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--bounds", action="store_true", help="add the exact bound comparison")
    p.add_argument("--selection-n", type=int, default=10_000)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AuditError as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        for key in ("cell", "budget", "required", "label", "group"):
            if getattr(exc, key, None) is not None:
                err[key] = getattr(exc, key)
        sys.stderr.write(dumps(err))
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(dumps({"error": "OSError", "message": str(exc), "exit_code": 2}))
        return 2


if __name__ == "__main__":
    sys.exit(main())
