"""Experiment runner: build the stages of one config and run the selected checks.

Checks are independent jobs over immutable stage data. They run on a
thread pool and are reassembled in a fixed order (check, then stage), so
the report does not depend on the pool size.
"""

import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .config import config
from .engine import (
    StageBundle,
    build_stages,
    check_growth_conditions,
    decomposition_intervals,
    designated_generic_point,
    minimality_applicable,
    mixing_sequence,
)
from .errors import AbcTorusError, ConstructionError, ParameterError
from .exchange import matches_bruteforce
from .experiment_config import Budgets, ExperimentConfig
from .maps import TorusMap, quarter_turn, sobol_points
from .numerics import TorusPoint, torus_distance
from .progress import ProgressBarManager
from .schedule import RotationSchedule
from .verify import (
    CONFINEMENT_MIN_POINTS,
    DIMENSION_TOLERANCE,
    area_preservation_test,
    cantor_dimension_series,
    commutation_test,
    distribution_test,
    double_rotation_alignment,
    generic_set_dimension,
    generic_test,
    inverse_test,
    minimality_visit_test,
    nongeneric_trap_test,
    product_dimension_check,
    trapping_count_test,
)

DEVIATION_HEADER = ["variant", "n", "function", "average", "integral", "deviation", "bound", "passed"]
HEATMAP_HEADER = ["variant", "n", "i", "j", "count"]
BOXCOUNT_HEADER = ["label", "depth", "delta", "count", "log_inv_delta", "log_count", "estimate"]

# Longest phase multiset checked exactly by the schedule check
PHASE_CHECK_LIMIT = 2**24
DISTRIBUTION_COLUMNS = 64
ORACLE_PIECE_LIMIT = 48
CANTOR_SERIES_TOLERANCE = 0.03


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check, at one stage or for the whole run.

    ``rows`` carries CSV rows keyed by artifact name; they are written by
    the report writer and left out of ``to_dict``.
    """

    name: str
    stage: Optional[int]
    hard: bool
    passed: bool
    details: Dict[str, Any]
    advisories: tuple[str, ...] = field(default_factory=tuple)
    rows: Dict[str, List[List[str]]] = field(default_factory=dict)

    @property
    def key(self) -> str:
        return self.name if self.stage is None else f"{self.name}@{self.stage}"

    @property
    def failed_hard(self) -> bool:
        return self.hard and not self.passed

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "stage": self.stage,
            "hard": self.hard,
            "passed": self.passed,
            "details": self.details,
            "advisories": list(self.advisories),
        }


@dataclass(frozen=True)
class RunReport:
    experiment: ExperimentConfig
    schedule: RotationSchedule
    stages: tuple[Dict[str, Any], ...]
    checks: tuple[CheckResult, ...]
    advisories: tuple[str, ...]

    @property
    def failures(self) -> List[str]:
        return [c.key for c in self.checks if c.failed_hard]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": __version__,
            "config": self.experiment.to_dict(),
            "schedule": self.schedule.to_dict(),
            "stages": list(self.stages),
            "checks": [c.to_dict() for c in self.checks],
            "advisories": list(self.advisories),
            "failures": self.failures,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class RunContext:
    experiment: ExperimentConfig
    schedule: RotationSchedule
    stages: tuple[StageBundle, ...]

    @property
    def seed(self) -> int:
        return self.experiment.seed

    @property
    def budgets(self) -> Budgets:
        return self.experiment.budgets


StageCheck = Callable[[RunContext, StageBundle], CheckResult]
RunCheck = Callable[[RunContext], CheckResult]


# ---------------------------------------------------------------------------
# Run-level checks
# ---------------------------------------------------------------------------


def _check_schedule(ctx: RunContext) -> CheckResult:
    """Recurrence, coprimality and the exact phase multiset {i alpha_(n+1)} = {j / q_(n+1)}."""
    rows = ctx.schedule.rows
    entries = []
    advisories = []
    ok = True
    for prev, cur in zip(rows, rows[1:]):
        step = int(prev.k) * int(prev.l) * prev.q  # type: ignore[arg-type]
        recurrence = cur.p == step * prev.p + 1 and cur.q == step * prev.q
        coprime = math.gcd(cur.p, cur.q) == 1
        phases: Optional[bool] = None
        if cur.q <= PHASE_CHECK_LIMIT:
            hits = np.bincount((np.arange(cur.q, dtype=np.int64) * (cur.p % cur.q)) % cur.q, minlength=cur.q)
            phases = bool(np.all(hits == 1))
        else:
            advisories.append(f"stage {cur.n}: q={cur.q} too large for the exact phase check")
        ok = ok and recurrence and coprime and phases is not False
        entries.append({"n": cur.n, "recurrence": recurrence, "coprime": coprime, "phases_exact": phases})
    for row in rows:
        if row.flags is None:
            continue
        if not row.flags.mixing:
            advisories.append(f"stage {row.n}: q_(n+1) > 10 n^2 q_n fails by {-row.flags.mixing_margin}")
        if not row.flags.minimality:
            advisories.append(f"stage {row.n}: q_(n+1) > l_n q_n^2 fails by {-row.flags.minimality_margin}")
    return CheckResult("schedule", None, True, ok, {"steps": entries}, tuple(advisories))


def _check_quarter_turn(ctx: RunContext) -> CheckResult:
    """phi(1/10) is the rigid clockwise turn on [0.2, 0.8]^2 and the identity outside [0.1, 0.9]^2."""
    phi = quarter_turn(Fraction(1, 10))
    count = ctx.budgets.map_samples
    xs, ys = sobol_points(count, ctx.seed)
    ix, iy = 0.2 + 0.6 * xs, 0.2 + 0.6 * ys
    rx, ry = phi.apply(ix, iy)
    rigid = float(torus_distance(rx, ry, iy, 1.0 - ix).max())
    outer = (np.minimum(xs, ys) < 0.1) | (np.maximum(xs, ys) >= 0.9)
    ox, oy = xs[outer], ys[outer]
    fx, fy = phi.apply(ox, oy)
    fixed = float(torus_distance(fx, fy, ox, oy).max()) if len(ox) else 0.0
    det = float(np.max(np.abs(phi.jacobian_determinant(xs, ys) - 1.0)))
    tol = config.tau_geo
    details = {
        "samples": count,
        "rigid_defect": rigid,
        "outside_samples": int(len(ox)),
        "outside_defect": fixed,
        "det_defect": det,
        "tolerance": tol,
    }
    passed = rigid <= tol and fixed <= tol and det <= config.tau_jac
    return CheckResult("quarter_turn", None, True, passed, details)


def _check_growth(ctx: RunContext) -> CheckResult:
    growth = check_growth_conditions(ctx.stages, ctx.budgets.growth_samples, ctx.seed)
    advisories = [
        f"stage {g.n}: growth condition {c.name} not satisfied ({c.lhs:.6g} vs {c.rhs:.6g})"
        + (f"; {c.note}" if c.note else "")
        for g in growth
        for c in g.conditions
        if c.satisfied is False
    ]
    passed = all(g.all_satisfied for g in growth)
    return CheckResult("growth", None, False, passed, {"stages": [g.to_dict() for g in growth]}, tuple(advisories))


def _boxcount_rows(label: str, depth: int, result: Any) -> List[List[str]]:
    return [
        [label, str(depth), repr(d), str(c), repr(lx), repr(lc), repr(result.estimate)]
        for (d, c), (lx, lc) in zip(zip(result.scales, result.counts), result.rows())
    ]


def _check_dimension(ctx: RunContext) -> CheckResult:
    """Box dimension of T x C (hard for the middle-third set) and of C itself over depths."""
    spec = ctx.experiment.params.cantor
    depth = ctx.budgets.dimension_depth
    advisories: List[str] = []
    rows: List[List[str]] = []
    product = product_dimension_check(spec, depth)  # type: ignore[arg-type]
    rows.extend(_boxcount_rows(product.label, depth, product.result))
    series = []
    for k, result in cantor_dimension_series(spec, range(depth, depth + 3)):  # type: ignore[arg-type]
        rows.extend(_boxcount_rows("C", k, result))
        series.append({"depth": k, "estimate": result.estimate, "degenerate": result.degenerate})
    target = spec.dimension  # type: ignore[union-attr]
    if series and abs(series[-1]["estimate"] - target) > CANTOR_SERIES_TOLERANCE:
        advisories.append(
            f"Cantor box dimension {series[-1]['estimate']:.4f} at depth {series[-1]['depth']} "
            f"is more than {CANTOR_SERIES_TOLERANCE} from {target:.4f}"
        )
    hard = ctx.experiment.variant == "C"
    if not product.within:
        advisories.append(
            f"T x C box dimension {product.result.estimate:.4f} outside {product.lower:.4f} +/- {DIMENSION_TOLERANCE}"
        )
    details = {"target": target, "product": product.to_dict(), "series": series}
    return CheckResult("dimension", None, hard, product.within, details, tuple(advisories), {"boxcount": rows})


# ---------------------------------------------------------------------------
# Stage-level checks
# ---------------------------------------------------------------------------


def _factors(m: TorusMap) -> List[TorusMap]:
    return list(getattr(m, "factors", (m,)))


def _map_checks(name: str, stage: StageBundle, checks: Sequence[Any]) -> CheckResult:
    details = {"checks": [c.to_dict() for c in checks]}
    return CheckResult(name, stage.n, True, all(c.passed for c in checks), details)


def _check_commutation(ctx: RunContext, stage: StageBundle) -> CheckResult:
    """h_n commutes with the rotation by 1/q_n (so with S_(alpha_n))."""
    samples = ctx.budgets.map_samples
    shift = Fraction(1, stage.q_n)
    checks = [commutation_test(stage.h, shift, samples, ctx.seed)]
    checks.extend(commutation_test(f, shift, samples, ctx.seed) for f in _factors(stage.h))
    return _map_checks("commutation", stage, checks)


def _check_area(ctx: RunContext, stage: StageBundle) -> CheckResult:
    samples = ctx.budgets.map_samples
    maps = _factors(stage.h) + [stage.h, stage.H]
    return _map_checks("area", stage, [area_preservation_test(m, samples, ctx.seed) for m in maps])


def _check_roundtrip(ctx: RunContext, stage: StageBundle) -> CheckResult:
    samples = ctx.budgets.map_samples
    maps = _factors(stage.h) + [stage.H]
    return _map_checks("roundtrip", stage, [inverse_test(m, samples, ctx.seed) for m in maps])


def _check_alignment(ctx: RunContext, stage: StageBundle) -> CheckResult:
    report = double_rotation_alignment(stage)
    advisories = []
    if not report.passed:
        advisories.append(f"stage {stage.n}: only {report.in_aligned:.3f} of phi^g(B) lands in Y")
    return CheckResult("alignment", stage.n, False, report.passed, report.to_dict(), tuple(advisories))


def _evenly_spaced(count: int, limit: int) -> List[int]:
    if count <= limit:
        return list(range(count))
    return sorted({(i * count) // limit for i in range(limit)})


def _check_distribution(ctx: RunContext, stage: StageBundle) -> CheckResult:
    """Phi_n on the decomposition intervals of every band t."""
    n, r = stage.n, stage.params.r
    if stage.eps.eps1 >= Fraction(1, 4):  # type: ignore[operator]
        note = f"stage {n}: eps1={stage.eps.eps1} >= 1/4, no decomposition to test"
        return CheckResult("distribution", n, False, True, {"skipped": note}, (note,))
    columns = _evenly_spaced(stage.q_n, DISTRIBUTION_COLUMNS)
    samples = ctx.budgets.distribution_samples
    reports = [
        distribution_test(stage, iv, samples)
        for t in range(r)
        for iv in decomposition_intervals(stage, t, columns=columns)
    ]
    failed = [rep for rep in reports if not rep.passed]
    advisories = []
    not_displayed = sum(1 for rep in reports if not rep.displayed_covered)
    if not_displayed:
        advisories.append(f"stage {n}: {not_displayed} image(s) miss the displayed range [t/r + 2/(3nr), (t+1)/r - 2/(3nr)]")
    short = sum(1 for rep in reports if rep.height_ratio < 1 - rep.delta)
    if short:
        advisories.append(f"stage {n}: {short} image(s) shorter than (1 - delta)/r")
    details = {
        "intervals": len(reports),
        "columns": len(columns),
        "failed": len(failed),
        "max_x_spread": max(rep.x_spread for rep in reports),
        "gamma": reports[0].gamma,
        "max_proportional_defect": max(rep.proportional_defect for rep in reports),
        "epsilon": reports[0].epsilon,
        "first_failure": failed[0].to_dict() if failed else None,
    }
    return CheckResult("distribution", n, True, not failed, details, tuple(advisories))


def _check_genericity(ctx: RunContext, stage: StageBundle) -> CheckResult:
    budgets = ctx.budgets
    report = generic_test(stage, mc_samples=budgets.mc_samples, seed=ctx.seed, cap=budgets.full_period_cap)
    variant = stage.variant
    deviations = [
        [variant, str(stage.n), row.name, repr(row.average), repr(row.integral), repr(row.deviation), repr(row.bound), str(row.passed).lower()]
        for row in report.rows
    ]
    ny = report.grid.ny
    heatmap = [
        [variant, str(stage.n), str(idx // ny), str(idx % ny), str(int(count))]
        for idx, count in enumerate(report.cell_counts)
    ]
    advisories = [f"stage {stage.n}: {note}" for note in report.notes if note.startswith("period")]
    return CheckResult(
        "genericity",
        stage.n,
        True,
        report.passed,
        report.to_dict(),
        tuple(advisories),
        {"deviations": deviations, "counts_heatmap": heatmap},
    )


def _check_minimality(ctx: RunContext, stage: StageBundle) -> CheckResult:
    """Cell coverage from the designated point and quasi-random starting points."""
    budgets = ctx.budgets
    m = min(stage.q_next, budgets.full_period_cap)
    points = [designated_generic_point(stage).point]
    extra = budgets.minimality_points - 1
    if extra > 0:
        xs, ys = sobol_points(extra, ctx.seed)
        points.extend(TorusPoint(float(x), float(y)) for x, y in zip(xs, ys))
    reports = [minimality_visit_test(stage, p, m) for p in points]
    applicable = minimality_applicable(stage)
    truncated = reports[0].truncated
    passed = all(rep.passed for rep in reports)
    advisories = []
    if not applicable:
        advisories.append(f"stage {stage.n}: minimality mechanism inactive; coverage is reported only")
    if truncated:
        advisories.append(f"stage {stage.n}: orbit truncated to {m} of {stage.q_next} points; coverage is reported only")
    details = {
        "applicable": applicable,
        "points": len(reports),
        "min_coverage": min(rep.coverage for rep in reports),
        "reports": [rep.to_dict() for rep in reports],
    }
    return CheckResult("minimality", stage.n, applicable and not truncated, passed, details, tuple(advisories))


def _check_mixing(ctx: RunContext, stage: StageBundle) -> CheckResult:
    try:
        seq = mixing_sequence(stage)
    except ConstructionError as e:
        return CheckResult("mixing", stage.n, True, False, {"error": str(e)})
    return CheckResult("mixing", stage.n, True, seq.within_bound, seq.to_dict())


def _check_exchange(ctx: RunContext, stage: StageBundle) -> CheckResult:
    """Exact tiling of the exchange and agreement with the index rules."""
    exchange = stage.exchange
    check = exchange.partition_check()  # type: ignore[union-attr]
    tol = config.tau_geo
    pieces = list(exchange.pieces()) if stage.q_n * stage.s_n <= ORACLE_PIECE_LIMIT else None  # type: ignore[union-attr]
    if pieces is None:
        pieces = list(exchange.template)  # type: ignore[union-attr]
    mismatches = sum(1 for piece in pieces if not matches_bruteforce(exchange, piece, tol))  # type: ignore[arg-type]
    details = {
        "pieces_compared": len(pieces),
        "mismatches": mismatches,
        "source_tiles": check.source_tiles,
        "target_tiles": check.target_tiles,
        "source_area_defect": float(check.source_area_defect),
        "target_area_defect": float(check.target_area_defect),
        "unbalanced_pieces": check.unbalanced_pieces,
        "exact": check.exact,
    }
    advisories = tuple(f"stage {stage.n}: {a}" for a in exchange.advisories)  # type: ignore[union-attr]
    return CheckResult("exchange", stage.n, True, check.exact and mismatches == 0, details, advisories)


def _check_trapping(ctx: RunContext, stage: StageBundle) -> CheckResult:
    reports = []
    advisories = []
    for t1 in range(2**stage.n):
        try:
            reports.append(trapping_count_test(stage, t1))
        except ParameterError as e:
            advisories.append(f"stage {stage.n}: trapping strip {t1} skipped: {e}")
    passed = all(rep.passed for rep in reports)
    details = {"strips": len(reports), "reports": [rep.to_dict() for rep in reports]}
    return CheckResult("trapping", stage.n, True, passed, details, tuple(advisories))


def _check_confinement(ctx: RunContext, stage: StageBundle) -> CheckResult:
    report = nongeneric_trap_test(stage)
    advisories = [f"stage {stage.n}: {note}" for note in report.skipped]
    weak = [r.cell for r in report.results if r.deviation < 0.25 and not r.deviation_required]
    if weak:
        advisories.append(f"stage {stage.n}: {len(weak)} confined orbit(s) with mean height within 1/4 of 1/2")
    if len(report.results) < CONFINEMENT_MIN_POINTS:
        advisories.append(f"stage {stage.n}: only {len(report.results)} confined base points")
    return CheckResult("confinement", stage.n, True, report.passed, report.to_dict(), tuple(advisories))


def _check_generic_dimension(ctx: RunContext, stage: StageBundle) -> CheckResult:
    report = generic_set_dimension(stage)
    advisories = []
    if not report.within:
        advisories.append(
            f"stage {stage.n}: box dimension of {report.label} is {report.result.estimate:.4f}, "
            f"outside [{report.lower:.4f}, {report.upper:.4f}]"
        )
    return CheckResult("dimension", stage.n, False, report.within, report.to_dict(), tuple(advisories))


RUN_CHECKS: Dict[str, RunCheck] = {
    "schedule": _check_schedule,
    "quarter_turn": _check_quarter_turn,
    "growth": _check_growth,
    "dimension": _check_dimension,
}

STAGE_CHECKS: Dict[str, StageCheck] = {
    "commutation": _check_commutation,
    "area": _check_area,
    "roundtrip": _check_roundtrip,
    "alignment": _check_alignment,
    "distribution": _check_distribution,
    "genericity": _check_genericity,
    "minimality": _check_minimality,
    "mixing": _check_mixing,
    "exchange": _check_exchange,
    "trapping": _check_trapping,
    "confinement": _check_confinement,
    "dimension": _check_generic_dimension,
}


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Job:
    name: str
    stage: Optional[StageBundle]
    run: Callable[[], CheckResult]

    @property
    def label(self) -> str:
        return self.name if self.stage is None else f"{self.name}@{self.stage.n}"


def _jobs(ctx: RunContext) -> List[_Job]:
    jobs: List[_Job] = []
    for name in ctx.experiment.selected_checks():
        if name in RUN_CHECKS:
            fn = RUN_CHECKS[name]
            jobs.append(_Job(name, None, lambda fn=fn: fn(ctx)))  # type: ignore[misc]
        if name in STAGE_CHECKS:
            sfn = STAGE_CHECKS[name]
            for stage in ctx.stages:
                jobs.append(_Job(name, stage, lambda sfn=sfn, stage=stage: sfn(ctx, stage)))  # type: ignore[misc]
    return jobs


def _guarded(job: _Job) -> CheckResult:
    try:
        return job.run()
    except AbcTorusError as e:
        n = None if job.stage is None else job.stage.n
        return CheckResult(job.name, n, True, False, {"error": str(e)}, (f"{job.label}: {e}",))


def run(
    experiment: ExperimentConfig,
    jobs: Optional[int] = None,
    verbose: bool = False,
    show_progress: bool = True,
) -> RunReport:
    """Build the stages of ``experiment`` and run its selected checks.

    Args:
        experiment: Validated experiment config
        jobs: Worker threads (default: config.jobs)
        verbose: Print each check as it finishes to stderr
        show_progress: Show a progress bar on stderr

    Returns:
        RunReport; ``passed`` is False iff a hard check failed

    Raises:
        ConfigError: If the config's schedule is rejected
        ParameterError: If a stage cannot be built from the schedule
    """
    workers = max(1, jobs or config.jobs)
    schedule = experiment.schedule()
    if verbose:
        print(f"Building {experiment.n_max} stage(s) of variant {experiment.variant}", file=sys.stderr)
    stages = build_stages(experiment.params, schedule, experiment.n_max)
    ctx = RunContext(experiment, schedule, tuple(stages))
    job_list = _jobs(ctx)
    progress = ProgressBarManager(len(job_list), f"Variant {experiment.variant}", show_progress and not verbose)
    results: List[CheckResult] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_guarded, job) for job in job_list]
        for job, future in zip(job_list, futures):
            progress.set_current(job.label)
            result = future.result()
            results.append(result)
            if result.failed_hard:
                progress.update_on_error()
            else:
                progress.update()
            if verbose:
                status = "ok" if result.passed else ("FAILED" if result.hard else "soft fail")
                print(f"  {job.label}: {status}", file=sys.stderr)
    progress.finalize()

    advisories: List[str] = []
    for stage in stages:
        advisories.extend(stage.advisories)
    for result in results:
        advisories.extend(result.advisories)
    for note in advisories:
        print(f"Warning: {note}", file=sys.stderr)
    return RunReport(
        experiment=experiment,
        schedule=schedule,
        stages=tuple(stage.summary() for stage in stages),
        checks=tuple(results),
        advisories=tuple(advisories),
    )
