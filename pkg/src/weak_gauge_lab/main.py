#!/usr/bin/env python3
"""
Weak Gauge Lab - Command-line entry point.

Parses arguments, applies overrides to the scenario file, runs the scenario
and maps failures onto exit codes.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from weak_gauge_lab.core.laboratory import CheckStatus, run_scenario
from weak_gauge_lab.core.self_check import self_check
from weak_gauge_lab.data.results_store import ResultsStore
from weak_gauge_lab.utils.config import RunSettings, ScenarioConfig, load_config
from weak_gauge_lab.utils.exceptions import ConfigurationError, ResultsStoreError, WeakGaugeLabError
from weak_gauge_lab.utils.logger import setup_logging, update_log_level

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPTANCE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weak-gauge-lab",
        description="Gauge-invariant weak-value derivatives and field sensing for a charged particle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a scenario file and write its CSV tables and manifest")
    run.add_argument("config", type=Path, help="INI scenario file")
    run.add_argument("--check", action="store_true",
                     help="Also run the self-check suites; exit 4 if any acceptance line fails")
    run.add_argument("--theta-count", type=int, help="Number of evenly spaced gauge angles")
    run.add_argument("--seed", type=int, help="Seed for trajectory sampling")
    run.add_argument("--out", type=Path, help="Output directory")
    run.add_argument("--stride-steps", type=int, help="Single finite-difference stride, in time steps")

    sub.add_parser("self-check", help="Run the self-check suites on the default configuration")
    return parser


def _configure(args: argparse.Namespace) -> ScenarioConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(
        theta_count=args.theta_count, seed=args.seed, out=args.out, stride_steps=args.stride_steps
    )


def _print_lines(lines: Sequence[str]) -> None:
    for line in lines:
        print(line)


def run_command(args: argparse.Namespace) -> int:
    logger = logging.getLogger("weak_gauge_lab.main")
    store = ResultsStore(args.out if args.out is not None else RunSettings().out)
    try:
        cfg = _configure(args)
        store = ResultsStore(cfg.run.out)
        log_file = cfg.run.out / "logs" / "lab.log"
        try:
            setup_logging(log_file=log_file)
        except OSError as e:
            raise ResultsStoreError(f"Failed to set up logging: {e}", details=str(log_file.parent))
        update_log_level(cfg.run.log_level)

        report = run_scenario(cfg, store)
        lines: List[str] = report.lines
        failed = not report.passed
        if args.check:
            checks = self_check(cfg)
            lines = lines + [str(c) for c in checks]
            failed = failed or any(c.status is CheckStatus.FAIL for c in checks)
        _print_lines(lines)

        if args.check and failed:
            logger.warning("Acceptance failed")
            return EXIT_ACCEPTANCE
        return EXIT_OK

    except ConfigurationError as e:
        return _fail(e, store, EXIT_CONFIG)
    except WeakGaugeLabError as e:
        return _fail(e, store, EXIT_NUMERICAL)


def _fail(error: WeakGaugeLabError, store: Optional[ResultsStore], code: int) -> int:
    logging.getLogger("weak_gauge_lab.main").error(f"{type(error).__name__}: {error}")
    print(f"error: {type(error).__name__}: {error}", file=sys.stderr)
    if store is not None:
        try:
            store.write_error(error.to_record())
        except WeakGaugeLabError as e:
            print(f"error: could not write error record: {e}", file=sys.stderr)
    return code


def self_check_command() -> int:
    checks = self_check(ScenarioConfig())
    _print_lines([str(c) for c in checks])
    return EXIT_ACCEPTANCE if any(c.status is CheckStatus.FAIL for c in checks) else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for Weak Gauge Lab."""
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run_command(args)
    setup_logging()
    return self_check_command()


if __name__ == "__main__":
    sys.exit(main())
