#!/usr/bin/env python3
"""Dump a construction structure of an experiment config as CSV.

Targets:
    schedule        rotation schedule with growth flags
    regions         region catalog of one stage (one template column per family)
    exchange-table  every piece of the stage's rectangle exchange, checked against the index rules
    cantor-stage    kept intervals of the config's Cantor set at a given depth

Usage:
    python dump_structures.py TARGET --config FILE [--stage N] [--depth N] [--output FILE]
"""

import argparse
import csv
import os
import sys
from fractions import Fraction
from typing import List, Optional, Tuple

from utils.cantor import cantor_stage
from utils.config import config
from utils.engine import build_stages
from utils.errors import AbcTorusError, ConfigError, ParameterError
from utils.exchange import ROW_HEADER as EXCHANGE_HEADER
from utils.exchange import matches_bruteforce
from utils.experiment_config import ExperimentConfig
from utils.numerics import Interval, format_rational
from utils.regions import REGION_ROW_HEADER
from utils.schedule import ROW_HEADER as SCHEDULE_HEADER

TARGETS = ("schedule", "regions", "exchange-table", "cantor-stage")
CANTOR_HEADER = ["index", "lo", "hi", "length"]

Table = Tuple[List[str], List[List[str]]]


def _endpoint(value: object) -> str:
    return format_rational(value) if isinstance(value, Fraction) else repr(float(value))  # type: ignore[arg-type]


def _interval_row(index: int, iv: Interval) -> List[str]:
    return [str(index), _endpoint(iv.lo), _endpoint(iv.hi), _endpoint(iv.hi - iv.lo)]


def dump(what: str, experiment: ExperimentConfig, stage: int = 1, depth: int = 3) -> Table:
    """Header and rows of the named structure.

    Args:
        what: One of TARGETS
        experiment: Validated experiment config
        stage: Stage index for regions and exchange-table
        depth: Cantor depth for cantor-stage

    Raises:
        ParameterError: For an unknown target, a stage outside the config, or
            a Cantor target requested for variant A
    """
    if what not in TARGETS:
        raise ParameterError(f"unknown dump target {what!r}, expected one of {', '.join(TARGETS)}")
    schedule = experiment.schedule()
    if what == "schedule":
        return SCHEDULE_HEADER, schedule.to_rows()
    if what == "cantor-stage":
        spec = experiment.params.cantor
        if spec is None:
            raise ParameterError("variant A has no Cantor set")
        return CANTOR_HEADER, [_interval_row(i, iv) for i, iv in enumerate(cantor_stage(spec, depth).kept)]
    if not 1 <= stage <= experiment.n_max:
        raise ParameterError(f"stage must lie in [1, {experiment.n_max}], got {stage}")
    bundle = build_stages(experiment.params, schedule, stage)[-1]
    if what == "regions":
        return REGION_ROW_HEADER, bundle.catalog.to_rows()
    if bundle.exchange is None:
        raise ParameterError("variant A has no rectangle exchange")
    exchange = bundle.exchange
    rows = [
        [*row, str(matches_bruteforce(exchange, piece, config.tau_geo)).lower()]
        for piece, row in zip(exchange.pieces(), exchange.to_rows())
    ]
    return EXCHANGE_HEADER + ["oracle_match"], rows


def _create_argument_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser.

    Returns:
        Configured ArgumentParser instance
    """
    parser = argparse.ArgumentParser(description="Dump schedules, regions, exchange tables and Cantor stages as CSV")
    parser.add_argument("target", choices=TARGETS, help="Structure to dump")
    parser.add_argument(
        "--config",
        type=str,
        default=os.getenv("ABC_TORUS_CONFIG"),
        help="Experiment config, YAML or JSON (env: ABC_TORUS_CONFIG)",
    )
    parser.add_argument("--stage", type=int, default=1, help="Stage for regions and exchange-table (default: 1)")
    parser.add_argument("--depth", type=int, default=3, help="Depth for cantor-stage (default: 3)")
    parser.add_argument("--output", type=str, default=None, help="CSV file to write (default: stdout)")
    parser.add_argument(
        "--verbose",
        action="store_true",
        default=config.verbose,
        help="Report the number of rows written (env: ABC_TORUS_VERBOSE)",
    )
    return parser


def _write(header: List[str], rows: List[List[str]], output: Optional[str]) -> None:
    if output is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    with open(output, "w", newline="", encoding="utf-8") as csvfile:
        writer = csv.writer(csvfile, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments and dump the requested structure.

    Returns:
        Process exit status (0, 1 on a construction or write error, 2 on usage errors)
    """
    args = _create_argument_parser().parse_args(argv)
    try:
        if not args.config:
            raise ConfigError("no config given (use --config or ABC_TORUS_CONFIG)")
        experiment = ExperimentConfig.load_from_file(args.config)
        header, rows = dump(args.target, experiment, args.stage, args.depth)
    except (ConfigError, ParameterError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2
    except AbcTorusError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    try:
        _write(header, rows, args.output)
    except OSError as e:
        print(f"Error writing to {args.output}: {e}", file=sys.stderr)
        return 1
    if args.verbose:
        print(f"{args.target}: {len(rows)} rows", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
