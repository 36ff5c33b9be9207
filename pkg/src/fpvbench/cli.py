"""Command line interface.

    fpvbench run      --protocol ope --dataset DIR --tracker SPEC --out DIR
    fpvbench report   --runs DIR --out FILE
    fpvbench stats    --dataset DIR
    fpvbench validate --dataset DIR

Tracker specs: `baseline:<name>[:k=v,...]`, `exec:<command line>`, or
`recorded:<directory>`. Exit status is 0 on success and 1 on any hard
error; individual tracker failures are reported inside the run store, not
as process failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from fpvbench import __version__, metrics
from fpvbench.baselines import BaselineError
from fpvbench.dataset import (
    DatasetError,
    dataset_stats,
    load_dataset,
    validate_attributes,
)
from fpvbench.geometry import BoxError
from fpvbench.protocols import PROTOCOLS, ProtocolError, parse_latency_model
from fpvbench.report import ReportError, evaluate, regenerate, report_json
from fpvbench.runner import DEFAULT_TIMEOUT, RunnerError, parse_tracker_spec

WORKERS_ENV = "FPVBENCH_WORKERS"


def _default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpvbench",
        description="Benchmark toolkit for single-object tracking in "
                    "first-person video.",
    )
    parser.add_argument("--version", action="version",
                        version=f"fpvbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate trackers under a protocol")
    run.add_argument("--protocol", required=True, choices=PROTOCOLS)
    run.add_argument("--dataset", required=True, help="dataset directory")
    run.add_argument("--tracker", required=True, action="append",
                     help="tracker spec (repeatable): baseline:NAME[:k=v,..]"
                          " | exec:COMMAND | recorded:DIR")
    run.add_argument("--detections", default=None,
                     help="detections file (single sequence) or directory "
                          "of <sequence>.txt files; defaults to each "
                          "sequence's own detections.txt")
    run.add_argument("--latency", default="live",
                     help="RTE latency model: live | constant:SECONDS[:INIT]"
                          " | trace:FILE (default: live)")
    run.add_argument("--workers", type=int, default=_default_workers(),
                     help=f"parallel sequences (default ${WORKERS_ENV} or 1)")
    run.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT,
                     help="per-exchange timeout for external trackers "
                          "in seconds (default 60)")
    run.add_argument("--oracle-init", action="store_true",
                     help="HOI only: initialize from ground truth at each "
                          "interaction start instead of the detector")
    run.add_argument("--out", required=True, help="run store directory")
    run.set_defaults(func=cmd_run)

    report = sub.add_parser(
        "report", help="regenerate a report from a stored evaluation")
    report.add_argument("--runs", required=True, help="run store directory")
    report.add_argument("--out", required=True, help="output report JSON file")
    report.set_defaults(func=cmd_report)

    stats = sub.add_parser("stats", help="print dataset statistics as JSON")
    stats.add_argument("--dataset", required=True)
    stats.set_defaults(func=cmd_stats)

    validate = sub.add_parser(
        "validate", help="check dataset files and attribute consistency")
    validate.add_argument("--dataset", required=True)
    validate.set_defaults(func=cmd_validate)
    return parser


def cmd_run(args) -> int:
    handles = [parse_tracker_spec(spec) for spec in args.tracker]
    latency = parse_latency_model(args.latency)
    report = evaluate(
        args.protocol,
        handles,
        args.dataset,
        args.out,
        detections_arg=args.detections,
        latency=latency,
        workers=max(1, args.workers),
        timeout=args.timeout,
        oracle_init=args.oracle_init,
    )
    _print_rankings(report)
    failed = sum(
        len(doc["failed_runs"]) for doc in report["trackers"].values()
    )
    if failed:
        print(f"warning: {failed} failed run(s); see report.json",
              file=sys.stderr)
    print(f"run store written to {args.out}")
    return 0


def _print_rankings(report: dict) -> None:
    if report["protocol"] == "hoi":
        print(f"{'rank':>4}  {'tracker':<28} {'recall':>8}")
        for row in report["rankings"]:
            recall = "-" if row["recall"] is None else f"{row['recall']:.4f}"
            print(f"{row['rank']:>4}  {row['tracker']:<28} {recall:>8}")
        return
    print(f"{'rank':>4}  {'tracker':<28} {'ss':>8} {'nps':>8} "
          f"{'gsr':>8} {'mean':>8}")
    for row in report["rankings"]:
        cells = [
            "-" if row[k] is None else f"{row[k]:.4f}"
            for k in ("ss", "nps", "gsr", "mean")
        ]
        print(f"{row['rank']:>4}  {row['tracker']:<28} "
              f"{cells[0]:>8} {cells[1]:>8} {cells[2]:>8} {cells[3]:>8}")


def cmd_report(args) -> int:
    report = regenerate(args.runs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report_json(report), encoding="utf-8")
    print(f"report written to {out}")
    return 0


def cmd_stats(args) -> int:
    sequences = load_dataset(args.dataset)
    stats = dataset_stats(sequences)
    print(json.dumps(stats.as_dict(), indent=2, sort_keys=True))
    return 0


def cmd_validate(args) -> int:
    sequences = load_dataset(args.dataset)
    warnings = 0
    for seq in sequences:
        for code, flags in validate_attributes(seq).items():
            warnings += 1
            state = "declared but not observed" if flags["declared"] \
                else "observed but not declared"
            print(f"warning: {seq.name}: attribute {code} {state}")
    frames = sum(s.frame_count for s in sequences)
    print(f"ok: {len(sequences)} sequence(s), {frames} frame(s), "
          f"{warnings} attribute warning(s)")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, BoxError, BaselineError, RunnerError,
            ProtocolError, ReportError, metrics.EmptySeriesError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
