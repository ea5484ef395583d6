"""Write a run report and its CSV plot data to an output directory.

Everything written is a function of the config and seed: keys are
sorted, no timestamps are recorded, and every CSV's sha256 is listed in
``report.json``.
"""

import csv
import hashlib
import json
import os
from fractions import Fraction
from typing import Any, Dict, List

import numpy as np

from .numerics import format_rational
from .runner import BOXCOUNT_HEADER, DEVIATION_HEADER, HEATMAP_HEADER, RunReport
from .schedule import ROW_HEADER as SCHEDULE_HEADER

REPORT_FILE = "report.json"
CSV_FILES = ("schedule.csv", "deviations.csv", "counts_heatmap.csv", "boxcount.csv")


def _json_default(value: Any) -> Any:
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Fraction):
        return format_rational(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps_report(data: Dict[str, Any]) -> str:
    """Canonical JSON text of a report dict."""
    return json.dumps(data, sort_keys=True, indent=2, default=_json_default) + "\n"


def _write_csv(path: str, header: List[str], rows: List[List[str]]) -> str:
    """Write one CSV and return the sha256 of its bytes."""
    with open(path, "w", newline="", encoding="utf-8") as csvfile:
        writer = csv.writer(csvfile, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return file_sha256(path)


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def collect_rows(report: RunReport, artifact: str) -> List[List[str]]:
    """Rows for one CSV artifact, in check order."""
    return [row for check in report.checks for row in check.rows.get(artifact, [])]


def write_report(report: RunReport, out_dir: str) -> Dict[str, str]:
    """Write report.json and the CSV artifacts.

    Args:
        report: Finished run
        out_dir: Output directory, created if missing

    Returns:
        Mapping of artifact file name to sha256, report.json included

    Raises:
        OSError: If the directory or a file cannot be written
    """
    os.makedirs(out_dir, exist_ok=True)
    tables = {
        "schedule.csv": (SCHEDULE_HEADER, report.schedule.to_rows()),
        "deviations.csv": (DEVIATION_HEADER, collect_rows(report, "deviations")),
        "counts_heatmap.csv": (HEATMAP_HEADER, collect_rows(report, "counts_heatmap")),
        "boxcount.csv": (BOXCOUNT_HEADER, collect_rows(report, "boxcount")),
    }
    artifacts = {name: _write_csv(os.path.join(out_dir, name), header, rows) for name, (header, rows) in tables.items()}
    data = report.to_dict()
    data["artifacts"] = dict(sorted(artifacts.items()))
    report_path = os.path.join(out_dir, REPORT_FILE)
    with open(report_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_report(data))
    return {**artifacts, REPORT_FILE: file_sha256(report_path)}
