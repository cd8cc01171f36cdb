"""Command-line entry point.

Subcommands ``simulate``, ``theory``, ``compare``, and ``realdata`` read a
flat ``key = value`` config file, run the experiment grid, print a pivot
summary, and optionally write a CSV.  Exit codes: 0 success, 1 config
error, 2 when any grid cell failed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import ConfigError, RxoptError
from .gridrun import MODES, emit_csv, load_config, report_summary, run_grid


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rxopt",
        description=(
            "Expected optimism (test minus train error) of regression models: "
            "Monte-Carlo simulation, asymptotic values, and real-data resampling."
        ),
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run the grid in {mode} mode")
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=None, help="override the CSV output path")
        p.add_argument("--runs", type=int, default=None, help="override num_runs")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads (0 = auto); results do not depend on this",
        )
        p.add_argument("--quiet", action="store_true", help="suppress the summary table")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, args.mode)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        if args.out is not None:
            config = replace(config, out=args.out)
        if args.runs is not None:
            config = replace(config, num_runs=args.runs)
        if args.threads is not None:
            config = replace(config, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        rows = run_grid(config)
        if config.out:
            emit_csv(rows, config.out)
        if not args.quiet:
            if config.mode == "realdata":
                print("note: features were standardized to zero mean / unit variance")
            print(report_summary(rows))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except RxoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if any(row.status != "ok" for row in rows):
        failed = [f"{row.signal_kind}/{row.k_or_coeffs}/{row.model}" for row in rows if row.status != "ok"]
        print(f"{len(failed)} cell(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
