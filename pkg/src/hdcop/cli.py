"""Command-line surface: pairs, maxtest, stepdown, moebius, harness, report.

Exit codes: 0 success, 2 usage error, 3 data error (ties, malformed input).
The default seed comes from the HDCOP_SEED environment variable and is
overridable with --seed; every seeded run is bit-reproducible.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .association import all_pairs
from .errors import (
    ConfigInvalid,
    DegenerateColumn,
    DegenerateDimension,
    DimensionTooSmall,
    HdcopError,
    TiesDetected,
)
from .harness import ExperimentConfig, ExperimentResult, load_records, run_experiment, summarize_records
from .maxtest import run_maxtest
from .moebius import moebius_test
from .ranks import DataMatrix, compute_ranks, jitter_ties, load_csv
from .stepdown import stepdown_test

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


def _default_seed() -> int:
    try:
        return int(os.environ.get("HDCOP_SEED", "0"))
    except ValueError:
        return 0


def _load_data(args) -> DataMatrix:
    data = load_csv(args.data, header=args.header)
    if getattr(args, "jitter", False):
        data = jitter_ties(data, seed=args.seed)
    return data


def _emit(args, payload_json: str, tty_lines: list[str], csv_text: str | None = None) -> None:
    mode = getattr(args, "output", "tty")
    if mode == "json":
        print(payload_json)
    elif mode == "csv":
        print(csv_text if csv_text is not None else payload_json, end="")
    else:
        for line in tty_lines:
            print(line)


def _cmd_pairs(args) -> int:
    measures = tuple(m.strip() for m in args.measures.split(",") if m.strip())
    unknown = set(measures) - {"rho", "tau", "beta"}
    if unknown:
        print(f"usage error: unknown measures {sorted(unknown)}", file=sys.stderr)
        return EXIT_USAGE
    data = _load_data(args)
    table = all_pairs(data, measures=measures)
    tty = [f"pairwise measures  n={table.n}  d={table.d}"]
    for p, (i, j) in enumerate(table.pairs):
        parts = [f"({i},{j})"]
        for g in measures:
            parts.append(f"{g}={table.measure(g)[p]:+.4f}")
        tty.append("  ".join(parts))
    if args.report_dir:
        from .report import write_pairs_report

        written = write_pairs_report(table, args.report_dir)
        tty.append("report: " + ", ".join(str(p) for p in written))
    _emit(args, table.to_json(), tty, table.to_csv())
    return EXIT_OK


def _cmd_maxtest(args) -> int:
    data = _load_data(args)
    report = run_maxtest(data, gamma=args.measure, alpha=args.alpha, calibration=args.calibration)
    tty = [
        f"max-type test ({args.measure}, {report.calibration} calibration)",
        f"T = {report.T:.4f} over {report.c_n} pairs, argmax pair {report.argmax_pair}",
        f"p-value = {report.p_value:.4g}  ->  {'REJECT' if report.reject else 'no rejection'} at alpha={report.alpha}",
    ]
    _emit(args, report.to_json(), tty)
    return EXIT_OK


def _cmd_stepdown(args) -> int:
    data = _load_data(args)
    result = stepdown_test(data, alpha=args.alpha, B=args.boot, seed=args.seed, two_sided=args.two_sided)
    tty = [
        f"stepdown test (one-sided Spearman{', two-sided' if args.two_sided else ''}), "
        f"alpha={args.alpha}, B={args.boot}, seed={args.seed}",
        f"rejected {len(result.rejected)} of {len(result.pairs)} pairs in {len(result.steps)} step(s)",
    ]
    for s, step in enumerate(result.steps, start=1):
        tty.append(f"step {s}: critical value {step.critical_value:.4f}, newly rejected {step.newly_rejected}")
    _emit(args, result.to_json(), tty)
    return EXIT_OK


def _cmd_moebius(args) -> int:
    from itertools import combinations

    from .moebius import MoebiusStatTable, s_stat_rank_all
    from .ranks import compute_ranks

    data = _load_data(args)
    report = moebius_test(data, alpha=args.alpha)
    pseudo = compute_ranks(data)
    table = MoebiusStatTable(
        n=pseudo.n, d=pseudo.d, pairs=list(combinations(range(pseudo.d), 2)), s=s_stat_rank_all(pseudo)
    )
    tty = [
        "Moebius max-type independence test",
        f"max statistic = {report.statistic:.5f}, standardized y = {report.y:.4f}, argmax pair {report.argmax_pair}",
        f"p-value = {report.p_value:.4g}  ->  {'REJECT' if report.reject else 'no rejection'} at alpha={report.alpha}",
    ]
    _emit(args, report.to_json(), tty, table.to_csv())
    return EXIT_OK


def _cmd_harness_run(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    result = run_experiment(config, out_path=args.out, resume=not args.no_resume, threads=args.threads)
    if args.summary:
        Path(args.summary).write_text(result.to_json() + "\n")
    print(result.to_json())
    return EXIT_OK


def _cmd_harness_summarize(args) -> int:
    header, records = load_records(args.results)
    if header is None:
        print("results file has no config header; re-run with `harness run`", file=sys.stderr)
        return EXIT_DATA
    config = ExperimentConfig.from_dict(header)
    cells = summarize_records(config.kind, config.n_grid, records)
    result = ExperimentResult(config=config.to_dict(), kind=config.kind, cells=cells, wall_clock_s=0.0)
    if args.figures:
        from .report import write_experiment_report

        write_experiment_report(result, args.figures)
    if args.output == "csv":
        from .report import experiment_summary_csv

        print(experiment_summary_csv(result), end="")
    else:
        print(result.canonical_json())
    return EXIT_OK


def _cmd_report(args) -> int:
    header, records = load_records(args.results)
    if header is None:
        print("results file has no config header; re-run with `harness run`", file=sys.stderr)
        return EXIT_DATA
    config = ExperimentConfig.from_dict(header)
    cells = summarize_records(config.kind, config.n_grid, records)
    result = ExperimentResult(config=config.to_dict(), kind=config.kind, cells=cells, wall_clock_s=0.0)
    from .report import write_experiment_report

    written = write_experiment_report(result, args.out)
    for path in written:
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdcop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    seed = _default_seed()

    def add_data_opts(p):
        p.add_argument("data", help="CSV file of observations (rows = samples)")
        p.add_argument("--header", action="store_true", help="skip a header row")
        p.add_argument("--jitter", action="store_true", help="break ties by seeded jittering")
        p.add_argument("--seed", type=int, default=seed, help="seed (default: HDCOP_SEED or 0)")
        p.add_argument("--output", choices=("json", "csv", "tty"), default="tty")

    p = sub.add_parser("pairs", help="pairwise association measures")
    add_data_opts(p)
    p.add_argument("--measures", default="rho,tau,beta", help="comma list of rho,tau,beta")
    p.add_argument("--report-dir", default=None, help="write pairs.csv and heatmap figures here")
    p.set_defaults(func=_cmd_pairs)

    p = sub.add_parser("maxtest", help="max-type pairwise independence test")
    add_data_opts(p)
    p.add_argument("--measure", choices=("rho", "tau", "beta"), default="rho")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--calibration", choices=("gumbel", "gaussian"), default="gumbel")
    p.set_defaults(func=_cmd_maxtest)

    p = sub.add_parser("stepdown", help="multiplier-bootstrap stepdown test")
    add_data_opts(p)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--boot", type=int, default=1000, help="bootstrap replicates B")
    p.add_argument("--two-sided", action="store_true")
    p.set_defaults(func=_cmd_stepdown)

    p = sub.add_parser("moebius", help="Moebius max-type independence test")
    add_data_opts(p)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=_cmd_moebius)

    p = sub.add_parser("harness", help="Monte Carlo experiment driver")
    hsub = p.add_subparsers(dest="harness_command", required=True)
    pr = hsub.add_parser("run", help="run or resume an experiment")
    pr.add_argument("config", help="experiment config JSON file")
    pr.add_argument("-o", "--out", default=None, help="JSONL replicate log (enables resume)")
    pr.add_argument("--summary", default=None, help="also write the summary JSON here")
    pr.add_argument("--no-resume", action="store_true", help="overwrite any existing log")
    pr.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    pr.set_defaults(func=_cmd_harness_run)
    ps = hsub.add_parser("summarize", help="summarize a replicate log")
    ps.add_argument("results", help="JSONL replicate log")
    ps.add_argument("--output", choices=("json", "csv"), default="json")
    ps.add_argument("--figures", default=None, help="also render figures into this directory")
    ps.set_defaults(func=_cmd_harness_summarize)

    p = sub.add_parser("report", help="render summary.csv and figures from a replicate log")
    p.add_argument("results", help="JSONL replicate log")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except TiesDetected as exc:
        print(f"data error: {exc} (use --jitter to break ties)", file=sys.stderr)
        return EXIT_DATA
    except DegenerateColumn as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DimensionTooSmall, DegenerateDimension, ConfigInvalid) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except HdcopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
