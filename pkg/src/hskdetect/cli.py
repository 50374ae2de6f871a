"""Command-line entry point: ``hskdetect test|simulate|quantile``.

stdout carries only the machine-readable report; the human summary and
errors go to stderr.  Exit status is 0 on success, 2 on usage errors and 1
on runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import empirical
from .bootstrap import BootstrapConfig, BootstrapError
from .data import CsvSchema, DataError, ingest_csv, read_column
from .detection import BUILTINS, DegenerateDetectionError, DetectionFunction
from .empirical import TestConfig, run_test
from .kernels import KernelSpec
from .locpoly import DEFAULT_CV_GRID, SmootherConfig, SmootherError
from .nulldist import quantile_sup_bridge
from .simulate import PAPER_TABLES, SIZES, ReplicationError, ScenarioSpec, monte_carlo, reproduce_tables


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def _names(text: str) -> tuple[str, ...]:
    names = tuple(v.strip() for v in text.split(",") if v.strip())
    if not names:
        raise argparse.ArgumentTypeError("expected at least one column name")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hskdetect", description="Tests for heteroskedasticity in nonparametric regression.")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test one CSV dataset")
    t.add_argument("--input", required=True, help="CSV file with a header row ('-' for stdin)")
    t.add_argument("--x", required=True, type=_names, help="covariate columns, comma-separated")
    t.add_argument("--y", required=True, help="response column")
    t.add_argument("--delta", help="0/1 column marking observed responses")
    t.add_argument("--degree", type=int, default=1)
    bw = t.add_mutually_exclusive_group()
    bw.add_argument("--bandwidth", default="cv", help="bandwidth constant c, or 'cv'")
    bw.add_argument("--cv-grid", type=_floats, help="comma-separated CV grid of constants")
    t.add_argument("--kernel", help="epanechnikov, tricube or smooth:p (default smooth:m+2)")
    t.add_argument("--gamma", type=float, default=1.0, help="Hölder exponent in the bandwidth rule")
    t.add_argument("--omega", default="estimated", help="builtin name, 'estimated' or a CSV column")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--mar-mode", choices=empirical.MAR_MODES, default="auto")
    t.add_argument("--critical-value", type=float, help="use this fixed critical value")
    t.add_argument("--bootstrap", type=int, metavar="B", help="bootstrap critical value with B replications")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--smoothing", default="auto", help="bootstrap perturbation scale: 'auto' or a number")
    t.add_argument("--dump-residuals", metavar="PATH", help="write covariates, residuals and weights as CSV")
    t.add_argument("--format", choices=("json", "tsv"), default="json")

    s = sub.add_parser("simulate", help="Monte Carlo rejection frequencies")
    s.add_argument("--table", type=_ints, help="published table number(s) to reproduce, comma-separated")
    s.add_argument("--example", choices=("ex1", "ex2", "remark1"), help="run a single scenario instead")
    s.add_argument("--scale", type=int, default=0, help="scale function id for --example")
    s.add_argument("--detection", default=None, help="builtin name or 'estimated' for --example")
    s.add_argument("--n", type=int, default=100, help="sample size for --example")
    s.add_argument("--missing", action="store_true", help="logistic missingness (ex1 only)")
    s.add_argument("--runs", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sizes", type=_ints, default=SIZES, help="sample sizes to include for --table")
    s.add_argument("--quantile", choices=("paper", "asymptotic", "bootstrap"), default=None)
    s.add_argument("--with-bootstrap", action="store_true", help="also run the bootstrap cells of the tables")
    s.add_argument("--B", type=int, default=500, help="bootstrap replications")
    s.add_argument("--fast", action="store_true", help="cross-validate on the first replication only")
    s.add_argument("--format", choices=("json", "tsv"), default="json")

    q = sub.add_parser("quantile", help="upper quantile of sup|B0|")
    q.add_argument("--alpha", type=float, default=0.05)
    return parser


# -- test ------------------------------------------------------------------------


def _read_input(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _smoother(args) -> SmootherConfig:
    try:
        kernel = KernelSpec.parse(args.kernel) if args.kernel else None
        if args.cv_grid is not None:
            return SmootherConfig(args.degree, "cv", args.cv_grid, kernel, holder_gamma=args.gamma)
        if args.bandwidth == "cv":
            bandwidth = "cv"
        else:
            try:
                bandwidth = float(args.bandwidth)
            except ValueError:
                raise UsageError(f"--bandwidth must be a number or 'cv', got {args.bandwidth!r}") from None
        return SmootherConfig(args.degree, bandwidth, DEFAULT_CV_GRID, kernel, holder_gamma=args.gamma)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _detection(args, text: str) -> DetectionFunction:
    if args.omega == "estimated":
        return DetectionFunction.estimated()
    if args.omega in BUILTINS:
        return DetectionFunction.builtin(args.omega)
    return DetectionFunction.user(read_column(text, args.omega), args.omega)


def _quantile_source(args):
    if args.bootstrap is not None and args.critical_value is not None:
        raise UsageError("--bootstrap and --critical-value are mutually exclusive")
    if args.bootstrap is not None:
        smoothing = args.smoothing
        if smoothing != "auto":
            try:
                smoothing = float(smoothing)
            except ValueError:
                raise UsageError(f"--smoothing must be 'auto' or a number, got {smoothing!r}") from None
        try:
            return BootstrapConfig(B=args.bootstrap, seed=args.seed, smoothing=smoothing), None
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.critical_value is not None:
        return "fixed", args.critical_value
    return "asymptotic", None


def _dump_residuals(path: str, prep) -> None:
    X = prep.X_original
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{k + 1}" for k in range(X.shape[1])] + ["residual", "weight"])
        for j in range(len(prep.residuals)):
            writer.writerow([repr(float(v)) for v in X[j]] + [repr(float(prep.residuals[j])), repr(float(prep.weights.values[j]))])


def cmd_test(args) -> int:
    smoother = _smoother(args)
    source, crit = _quantile_source(args)
    schema = CsvSchema(tuple(args.x), args.y, args.delta)
    text = _read_input(args.input)
    dataset = ingest_csv(text, schema)
    detection = _detection(args, text)
    try:
        config = TestConfig(smoother, detection, args.alpha, source, args.mar_mode, crit)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    outcome = run_test(dataset, config)
    if args.dump_residuals:
        _dump_residuals(args.dump_residuals, empirical.prepare(dataset, config))
    payload = outcome.to_dict()
    if args.format == "json":
        print(json.dumps(payload, sort_keys=True))
    else:
        for key in ("statistic", "critical_value", "p_value", "reject", "n_used"):
            print(f"{key}\t{payload[key]}")
    verdict = "reject" if outcome.reject else "do not reject"
    print(
        f"T = {outcome.statistic:.4f}, critical value {outcome.critical_value:.4f} "
        f"({outcome.diagnostics['quantile_source']}), p = {outcome.p_value:.4f}: {verdict} homoskedasticity",
        file=sys.stderr,
    )
    return 0


# -- simulate ------------------------------------------------------------------------


def _tsv(rows: list[dict], columns: list[str]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, delimiter="\t", lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row[c] for c in columns])
    return out.getvalue()


def cmd_simulate(args) -> int:
    if args.runs < 1:
        raise UsageError("--runs must be at least 1")
    if (args.table is None) == (args.example is None):
        raise UsageError("give exactly one of --table or --example")
    if args.table is not None:
        unknown = [t for t in args.table if t not in PAPER_TABLES]
        if unknown:
            raise UsageError(f"unknown table(s) {unknown}; choose from {sorted(PAPER_TABLES)}")
        quantile = args.quantile or "paper"
        if quantile == "bootstrap":
            raise UsageError("use --with-bootstrap to add bootstrap cells to a table")
        report = reproduce_tables(
            args.table, args.runs, args.seed, args.sizes, args.with_bootstrap, args.fast, quantile, args.B
        )
        if args.format == "json":
            print(json.dumps(report, sort_keys=True))
        else:
            cols = ["table", "scale", "n", "quantile", "paper", "ours", "se", "tolerance", "within"]
            sys.stdout.write(_tsv(report["cells"], cols))
        inside = sum(c["within"] for c in report["cells"])
        print(f"{inside} of {len(report['cells'])} cells within tolerance of the published figures", file=sys.stderr)
        return 0

    detection = args.detection or ("remark1" if args.example == "remark1" else "estimated")
    try:
        spec = ScenarioSpec(
            example=args.example, scale_id=args.scale, detection=detection, n=args.n, runs=args.runs,
            missing=args.missing, seed=args.seed, quantile=args.quantile or "asymptotic", B=args.B, fast=args.fast,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = monte_carlo(spec)
    payload = {"schema_version": 1, **report.to_dict()}
    if args.format == "json":
        print(json.dumps(payload, sort_keys=True))
    else:
        sys.stdout.write(_tsv([payload], ["label", "runs", "rejections", "frequency", "se", "mean_statistic"]))
    print(f"{report.label}: {report.frequency:.3f} (se {report.se:.3f}) in {report.runtime:.1f} s", file=sys.stderr)
    return 0


def cmd_quantile(args) -> int:
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    print(f"{quantile_sup_bridge(args.alpha):.4f}")
    return 0


COMMANDS = {"test": cmd_test, "simulate": cmd_simulate, "quantile": cmd_quantile}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hskdetect: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, SmootherError, DegenerateDetectionError, BootstrapError, ReplicationError, ValueError) as exc:
        print(f"hskdetect: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
