"""Command-line scenario runner.

    semrtc run scenario.ini --out results.csv
    semrtc sweep scenario.ini --axis loss --values 0,0.01,0.05 --out sweep.csv

Exit codes: 0 on success, 2 on configuration or usage problems.
"""
from __future__ import annotations

import argparse
import sys

from . import scenario as scen
from .mapfile import MapFormatError
from .session import ConfigError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semrtc",
        description="Packet-level simulator for real-time video to an "
                    "AI receiver")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario, one row per seed")
    _common_args(run_p)

    sweep_p = sub.add_parser("sweep",
                             help="run a scenario across one swept axis")
    _common_args(sweep_p)
    sweep_p.add_argument("--axis", required=True, choices=scen.SWEEP_AXES)
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated axis values, e.g. 0,0.01,0.05")
    return parser


def _common_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="scenario INI file")
    parser.add_argument("--out", default=None,
                        help="CSV output path (default: stdout)")
    parser.add_argument("--parallel", type=int, default=1, metavar="N",
                        help="run up to N simulations concurrently")
    parser.add_argument("--trace", action="store_true",
                        help="write an event trace next to --out")


def _parse_values(raw: str) -> list:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ConfigError("--values needs at least one number")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"--values must be numbers, got {raw!r}") from None


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.trace and args.out is None:
        parser.error("--trace requires --out")
    if args.parallel < 1:
        parser.error("--parallel must be >= 1")
    try:
        loaded = scen.load_scenario(args.config)
        if args.command == "run":
            jobs = scen.expand_runs(loaded, trace=args.trace)
        else:
            jobs = scen.expand_sweep(loaded, args.axis,
                                     _parse_values(args.values),
                                     trace=args.trace)
        results = scen.run_jobs(jobs, parallel=args.parallel)
        csv_text = scen.results_to_csv(results)
    except (ConfigError, MapFormatError) as exc:
        print(f"semrtc: {exc}", file=sys.stderr)
        return 2

    if args.out is None:
        sys.stdout.write(csv_text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as handle:
            handle.write(csv_text)
        if args.trace:
            with open(args.out + ".trace", "w", encoding="utf-8",
                      newline="") as handle:
                handle.write(scen.results_to_trace(results))
    return 0


if __name__ == "__main__":
    sys.exit(main())
