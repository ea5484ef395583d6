#!/usr/bin/env python3
"""Run the verification suite of one experiment config.

Builds the stages of the configured variant, runs the selected checks
and writes report.json plus CSV plot data to the output directory.

Usage:
    python run_experiment.py --config configs/variant_a.yml [--out DIR] [--seed N]
        [--only CHECK[,CHECK...]] [--jobs N] [--verbose] [--no-progress]

Exit status: 0 when every hard check passes, 1 when one fails, 2 for
usage and config errors.
"""

import argparse
import os
import sys
from typing import List, Optional

from utils.config import config
from utils.errors import AbcTorusError, ConfigError, ParameterError
from utils.experiment_config import CHECK_NAMES, ExperimentConfig, parse_only
from utils.report_writer import write_report
from utils.runner import run

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _create_argument_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser.

    Returns:
        Configured ArgumentParser instance
    """
    parser = argparse.ArgumentParser(description="Build AbC torus maps and verify their finite-stage properties")
    parser.add_argument(
        "--config",
        type=str,
        default=os.getenv("ABC_TORUS_CONFIG"),
        help="Experiment config, YAML or JSON (env: ABC_TORUS_CONFIG)",
    )
    parser.add_argument(
        "--out",
        type=str,
        default=None,
        help=f"Output directory; overrides the config's out (env: ABC_TORUS_OUTPUT_DIR, default: {config.output_dir})",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help=f"Quasi-random seed; overrides the config's seed (env: ABC_TORUS_SEED, default: {config.seed})",
    )
    parser.add_argument(
        "--only",
        type=str,
        default=os.getenv("ABC_TORUS_ONLY"),
        help=f"Comma-separated checks to run, from: {', '.join(CHECK_NAMES)} (env: ABC_TORUS_ONLY)",
    )
    parser.add_argument(
        "--jobs",
        type=int,
        default=config.jobs,
        help=f"Worker threads for the checks (env: ABC_TORUS_JOBS, default: {config.jobs})",
    )
    parser.add_argument(
        "--verbose",
        action="store_true",
        default=config.verbose,
        help="Print each check as it finishes and disable progress bar (env: ABC_TORUS_VERBOSE)",
    )
    parser.add_argument(
        "--no-progress",
        action="store_true",
        default=not config.progress,
        help="Disable progress bar (also disabled by --verbose) (env: ABC_TORUS_PROGRESS=false)",
    )
    return parser


def _load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """Load the config file and apply command-line overrides.

    Raises:
        ConfigError: If the config is missing or invalid
    """
    if not args.config:
        raise ConfigError("no config given (use --config or ABC_TORUS_CONFIG)")
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
    experiment = ExperimentConfig.load_from_file(args.config)
    only: Optional[List[str]] = parse_only(args.only) if args.only else None
    return experiment.with_overrides(out=args.out, seed=args.seed, only=only)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run the experiment and write the report.

    Returns:
        Process exit status
    """
    args = _create_argument_parser().parse_args(argv)

    try:
        experiment = _load_experiment(args)
        report = run(experiment, jobs=args.jobs, verbose=args.verbose, show_progress=not args.no_progress)
    except (ConfigError, ParameterError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except AbcTorusError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILED

    try:
        artifacts = write_report(report, experiment.out)
    except OSError as e:
        print(f"Error writing to {experiment.out}: {e}", file=sys.stderr)
        return EXIT_FAILED

    print(f"\nReport written to {os.path.join(experiment.out, 'report.json')} ({len(artifacts)} files)", file=sys.stderr)
    if not report.passed:
        print(f"Error: hard check(s) failed: {', '.join(report.failures)}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
