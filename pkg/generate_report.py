"""Generate a markdown summary from a run report.

Reads report.json from a run's output directory and writes the schedule,
the per-check outcomes, the genericity deviations and the advisories as
markdown tables.

Usage:
    python generate_report.py [--input-dir DIR] [--output FILE]
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional


class CheckRow(NamedTuple):
    """One check outcome from the report."""

    name: str
    stage: Optional[int]
    hard: bool
    passed: bool
    summary: str


def _load_report(input_dir: Path) -> Dict[str, Any]:
    """Read report.json from a run directory.

    Args:
        input_dir: Directory written by run_experiment.py.

    Returns:
        Parsed report.
    """
    path = input_dir / "report.json"
    if not path.exists():
        print(f"No report.json found in {input_dir}", file=sys.stderr)
        sys.exit(1)
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _summarize(details: Dict[str, Any]) -> str:
    """A short, check-specific digest of the details block."""
    if "error" in details:
        return f"error: {details['error']}"
    if "skipped" in details:
        return str(details["skipped"])
    if "rows" in details:
        worst = max(details["rows"], key=lambda r: r["deviation"] / r["bound"] if r["bound"] else 0.0)
        return f"worst {worst['name']}: {worst['deviation']:.3g} <= {worst['bound']:.3g}"
    if "checks" in details:
        worst = max(details["checks"], key=lambda c: c["max_defect"])
        return f"max defect {worst['max_defect']:.3g} ({worst['map']})"
    if "min_coverage" in details:
        return f"min coverage {details['min_coverage']:.3f} over {details['points']} orbits"
    if "intervals" in details:
        return f"{details['intervals'] - details['failed']}/{details['intervals']} intervals"
    if "mismatches" in details:
        return f"{details['pieces_compared']} pieces, {details['mismatches']} mismatches"
    if "strips" in details:
        return f"{details['strips']} strips"
    if "results" in details:
        inside = sum(1 for r in details["results"] if r["inside"])
        return f"{inside}/{len(details['results'])} orbits confined"
    if "product" in details:
        return f"T x C: {details['product']['box_count']['estimate']:.4f}"
    if "box_count" in details:
        return f"{details['label']}: {details['box_count']['estimate']:.4f}"
    if "m" in details:
        return f"m = {details['m']}, a = {details['a']}"
    if "steps" in details:
        exact = sum(1 for s in details["steps"] if s["phases_exact"])
        return f"{len(details['steps'])} steps, {exact} with exact phases"
    if "stages" in details:
        met = sum(1 for s in details["stages"] if s["all_satisfied"])
        return f"{met}/{len(details['stages'])} stages meet every condition"
    if "in_Y" in details:
        return f"{details['in_Y']:.3f} in Y, {details['in_Y_literal']:.3f} in the right-hand strip"
    return ""


def _check_rows(report: Dict[str, Any]) -> List[CheckRow]:
    return [
        CheckRow(c["name"], c["stage"], c["hard"], c["passed"], _summarize(c["details"]))
        for c in report["checks"]
    ]


def _generate_markdown(report: Dict[str, Any], input_dir: Path) -> str:
    """Generate the markdown summary.

    Args:
        report: Parsed report.json.
        input_dir: Run directory (for the footer).

    Returns:
        Markdown string.
    """
    cfg = report["config"]
    lines = []
    lines.append("")
    lines.append(f"# Variant {cfg['variant']}: {'PASS' if report['passed'] else 'FAIL'}")
    lines.append("")
    lines.append("## Schedule")
    lines.append("")
    lines.append("| n | p_n | q_n | k_n | l_n | s_n | mixing growth | minimality growth |")
    lines.append("|---|-----|-----|-----|-----|-----|---------------|-------------------|")
    for s in report["schedule"]["stages"]:
        flags = s["flags"] or {}
        cells = [s["n"], s["p"], s["q"], s["k"], s["l"], s["s"], flags.get("mixing"), flags.get("minimality")]
        lines.append("| " + " | ".join("" if v is None else str(v) for v in cells) + " |")
    lines.append("")
    lines.append("## Checks")
    lines.append("")
    lines.append("| Check | Stage | Kind | Result | Summary |")
    lines.append("|-------|-------|------|--------|---------|")
    for row in _check_rows(report):
        stage = "" if row.stage is None else str(row.stage)
        kind = "hard" if row.hard else "soft"
        result = "pass" if row.passed else "**fail**"
        lines.append(f"| {row.name} | {stage} | {kind} | {result} | {row.summary} |")

    if report["advisories"]:
        lines.append("")
        lines.append("## Advisories")
        lines.append("")
        for note in report["advisories"]:
            lines.append(f"- {note}")

    lines.append("")
    lines.append("---")
    lines.append("")
    artifacts = report.get("artifacts", {})
    lines.append(
        f"_Generated from {input_dir / 'report.json'}; {len(report['checks'])} checks, {len(artifacts)} CSV artifacts_"
    )
    lines.append("")

    return "\n".join(lines)


def main() -> None:
    """Parse arguments and generate report."""
    parser = argparse.ArgumentParser(description="Generate markdown summary from a run report")
    parser.add_argument("--input-dir", default="results", help="Directory with report.json")
    parser.add_argument("--output", default="latest_results.md", help="Output markdown file")
    args = parser.parse_args()

    input_dir = Path(args.input_dir)
    report = _load_report(input_dir)

    markdown = _generate_markdown(report, input_dir)

    with open(args.output, "w", encoding="utf-8") as f:
        f.write(markdown)

    print(f"Report written to {args.output} ({len(report['checks'])} checks)", file=sys.stderr)


if __name__ == "__main__":
    main()
