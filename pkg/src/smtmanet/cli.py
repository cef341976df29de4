"""Command-line entry point: ``smtmanet run <plan>`` and ``smtmanet summarize <csv>``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import HarnessError, PlanError, execute, parse_plan, read_csv, summarize


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smtmanet", description="APS-SMT vs NSP experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment plan")
    run_p.add_argument("plan", help="key=value plan file")
    run_p.add_argument("--out", help="results CSV (default: the plan's out key, else stdout)")
    run_p.add_argument("--parallel", type=int, default=1, metavar="K", help="worker processes")
    run_p.add_argument("--log-events", action="store_true",
                       help="write per-run event logs to <out>.events/")
    run_p.add_argument("--metrics", metavar="PATH", help="per-window metrics snapshot CSV")

    sum_p = sub.add_parser("summarize", help="print the delivery table for a results CSV")
    sum_p.add_argument("csv")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            if args.parallel < 1:
                raise PlanError("--parallel: must be at least 1")
            plan = parse_plan(Path(args.plan).read_text())
            out = args.out or plan.out
            if args.log_events and out is None:
                raise PlanError("--log-events: needs an output path (--out or the plan's out key)")
            result = execute(plan, out=out, parallel=args.parallel, log_events=args.log_events,
                             metrics_out=args.metrics)
            if out is None:
                from .harness import to_csv
                sys.stdout.write(to_csv(result))
            print(summarize(result), file=sys.stderr if out is None else sys.stdout)
        else:
            print(summarize(read_csv(args.csv)))
    except (PlanError, HarnessError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
