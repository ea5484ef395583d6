"""Numerical verification of the stage maps T_n.

Every routine returns a frozen report with a ``passed`` verdict and a
``to_dict`` for the JSON report. Orbits are streamed chunk by chunk;
nothing here materializes a full period except the naive oracles.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, ClassVar, Dict, Iterable, Iterator, List, Optional, Sequence

import numpy as np

from .cantor import CantorSpec
from .config import config
from .dimension import (
    BoxCountResult,
    box_dimension,
    cantor_box_dimension,
    default_cantor_scales,
    product_box_dimension,
    product_set_points,
)
from .engine import (
    ConjugatedRotation,
    DecompositionInterval,
    StageBundle,
    base_orbit_chunks,
    decomposition_intervals,
    designated_generic_point,
    minimality_applicable,
    mixing_map,
    orbit_chunks,
)
from .errors import ParameterError, VerificationError
from .maps import TorusMap, build_phi_g, sobol_points
from .numerics import (
    GridSpec,
    Interval,
    TorusPoint,
    circle_spread,
    locate_cell,
    locate_cells,
    torus_distance,
    wrap_unit,
)
from .regions import RegionFamily

Chunks = Iterable[tuple[np.ndarray, np.ndarray, np.ndarray]]
TWO_PI = 2 * math.pi


# ---------------------------------------------------------------------------
# Test functions and Birkhoff sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """A continuous observable psi on the torus with its exact integral."""

    __test__: ClassVar[bool] = False

    name: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    integral: float
    sup_norm: float
    lipschitz: float

    def __call__(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return self.fn(xs, ys)


@dataclass(frozen=True)
class TestFunctionSet:
    """Finite family of observables used by the genericity test."""

    __test__: ClassVar[bool] = False

    functions: tuple[TestFunction, ...]

    @classmethod
    def default(cls) -> "TestFunctionSet":
        """Constant, first Fourier modes, the diagonal character and a product mode.

        Lipschitz constants are for d0; sin 2 pi (x + y) needs 4 pi, the others 2 pi.
        """
        return cls(
            (
                TestFunction("one", lambda x, y: np.ones_like(x), 1.0, 1.0, 0.0),
                TestFunction("cos_x", lambda x, y: np.cos(TWO_PI * x), 0.0, 1.0, TWO_PI),
                TestFunction("sin_x", lambda x, y: np.sin(TWO_PI * x), 0.0, 1.0, TWO_PI),
                TestFunction("cos_y", lambda x, y: np.cos(TWO_PI * y), 0.0, 1.0, TWO_PI),
                TestFunction("sin_y", lambda x, y: np.sin(TWO_PI * y), 0.0, 1.0, TWO_PI),
                TestFunction("sin_x_plus_y", lambda x, y: np.sin(TWO_PI * (x + y)), 0.0, 1.0, 2 * TWO_PI),
                TestFunction("cos_x_cos_y", lambda x, y: np.cos(TWO_PI * x) * np.cos(TWO_PI * y), 0.0, 1.0, TWO_PI),
            )
        )

    def __iter__(self) -> Iterator[TestFunction]:
        return iter(self.functions)

    def __len__(self) -> int:
        return len(self.functions)

    @property
    def names(self) -> List[str]:
        return [f.name for f in self.functions]

    @property
    def max_lipschitz(self) -> float:
        return max(f.lipschitz for f in self.functions)


class BirkhoffSum:
    """Compensated running sum: every chunk is summed exactly rounded, then the chunk sums."""

    def __init__(self) -> None:
        self._partials: List[float] = []
        self.count = 0

    def add(self, values: np.ndarray) -> None:
        self._partials.append(math.fsum(np.asarray(values, dtype=float).tolist()))
        self.count += len(values)

    def mean(self) -> float:
        if self.count == 0:
            raise VerificationError("Birkhoff average of an empty orbit")
        return math.fsum(self._partials) / self.count


def birkhoff_average(chunks: Chunks, psi: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
    """(1/m) sum psi(T^i x) over a streamed orbit.

    Raises:
        VerificationError: If the stream is empty
    """
    acc = BirkhoffSum()
    for _, xs, ys in chunks:
        acc.add(psi(xs, ys))
    return acc.mean()


def birkhoff_averages(chunks: Chunks, functions: TestFunctionSet) -> Dict[str, float]:
    """All averages of the set in one pass over the stream."""
    sums = {f.name: BirkhoffSum() for f in functions}
    for _, xs, ys in chunks:
        for f in functions:
            sums[f.name].add(f(xs, ys))
    return {name: acc.mean() for name, acc in sums.items()}


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    stderr: float
    samples: int

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples}


def monte_carlo_integral(
    m: TorusMap,
    psi: Callable[[np.ndarray, np.ndarray], np.ndarray],
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> MonteCarloEstimate:
    """Quasi-Monte Carlo estimate of the integral of psi o m, with the sample standard error."""
    count = samples or config.mc_samples
    if count < 2:
        raise ParameterError(f"Monte Carlo needs at least 2 samples, got {count}")
    xs, ys = sobol_points(count, config.seed if seed is None else seed)
    return _estimate(psi(*m.apply(xs, ys)))


def _estimate(values: np.ndarray) -> MonteCarloEstimate:
    count = len(values)
    return MonteCarloEstimate(float(values.mean()), float(values.std(ddof=1) / math.sqrt(count)), count)


# ---------------------------------------------------------------------------
# Genericity
# ---------------------------------------------------------------------------


def genericity_bound(stage: StageBundle, sup_norm: float) -> float:
    """Allowed |average - integral| at stage n for an observable of sup norm ``sup_norm``."""
    n = stage.n
    slack = 1.0 / 2 ** (n + 1)
    if stage.variant == "A":
        nr = n * stage.params.r
        return 2.0 / nr * sup_norm + 8.0 / nr + slack
    if stage.variant == "C":
        return 2.0 / n**2 * sup_norm + 4.0 / n**2 + slack
    if stage.variant == "D":
        return 4.0 / n**2 + 2.0 / n**4 * sup_norm + slack
    alpha = float(stage.params.alpha)  # type: ignore[arg-type]
    return 4.0 / n**2 + sup_norm / 2 ** (n * (alpha - 1)) + slack


def orbit_window(q_next: int, cap: Optional[int] = None) -> tuple[int, int]:
    """(length, stride) covering one period with at most ``cap`` points."""
    limit = cap or config.full_period_cap
    if q_next <= limit:
        return q_next, 1
    stride = -(-q_next // limit)
    return -(-q_next // stride), stride


@dataclass(frozen=True)
class GenericityRow:
    name: str
    average: float
    integral: float
    deviation: float
    bound: float
    mc_integral: float
    mc_stderr: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.bound

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "average": self.average,
            "integral": self.integral,
            "deviation": self.deviation,
            "bound": self.bound,
            "mc_integral": self.mc_integral,
            "mc_stderr": self.mc_stderr,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class GenericityReport:
    n: int
    point: TorusPoint
    orbit_length: int
    stride: int
    rows: tuple[GenericityRow, ...]
    cell_counts: np.ndarray
    grid: GridSpec
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def full_period(self) -> bool:
        return self.stride == 1

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "point": self.point.to_json(),
            "orbit_length": self.orbit_length,
            "stride": self.stride,
            "full_period": self.full_period,
            "rows": [row.to_dict() for row in self.rows],
            "grid": [self.grid.nx, self.grid.ny],
            "empty_cells": int((self.cell_counts == 0).sum()),
            "notes": list(self.notes),
            "passed": self.passed,
        }


def generic_test(
    stage: StageBundle,
    point: Optional[TorusPoint] = None,
    functions: Optional[TestFunctionSet] = None,
    mc_samples: Optional[int] = None,
    seed: Optional[int] = None,
    cap: Optional[int] = None,
) -> GenericityReport:
    """Birkhoff averages of T_n along one period against the stage bound.

    The orbit starts at the designated point unless ``point`` is given.
    Points are also counted on the q_n x s_n grid for the heatmap.
    ``seed``, ``mc_samples`` and the orbit ``cap`` fall back to the shared config.
    """
    funcs = functions or TestFunctionSet.default()
    notes: List[str] = []
    if point is None:
        designated = designated_generic_point(stage)
        point = designated.point
        notes.append(f"designated point {designated.description}")
    length, stride = orbit_window(stage.q_next, cap)
    if stride > 1:
        notes.append(f"period {stage.q_next} subsampled with stride {stride}")
    grid = GridSpec(stage.q_n, stage.s_n)
    counts = np.zeros(grid.cell_count, dtype=np.int64)
    sums = {f.name: BirkhoffSum() for f in funcs}
    for _, xs, ys in orbit_chunks(stage.system, point, length, stride=stride):
        for f in funcs:
            sums[f.name].add(f(xs, ys))
        i, j = locate_cells(xs, ys, grid)
        counts += np.bincount(i * grid.ny + j, minlength=grid.cell_count)
    count = mc_samples or config.mc_samples
    hx, hy = stage.H.apply(*sobol_points(count, config.seed if seed is None else seed))
    rows = []
    for f in funcs:
        mc = _estimate(f(hx, hy))
        average = sums[f.name].mean()
        rows.append(
            GenericityRow(
                f.name,
                average,
                f.integral,
                abs(average - f.integral),
                genericity_bound(stage, f.sup_norm),
                mc.value,
                mc.stderr,
            )
        )
    return GenericityReport(stage.n, point, length, stride, tuple(rows), counts, grid, tuple(notes))


# ---------------------------------------------------------------------------
# Weak mixing distribution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistributionReport:
    interval: DecompositionInterval
    x_spread: float
    gamma: float
    image: Interval
    covers: bool
    proportional_defect: float
    epsilon: float
    height_ratio: float
    delta: float
    displayed_covered: bool

    @property
    def passed(self) -> bool:
        return self.covers and self.x_spread <= self.gamma and self.proportional_defect <= self.epsilon

    def to_dict(self) -> Dict[str, Any]:
        return {
            "interval": self.interval.to_dict(),
            "x_spread": self.x_spread,
            "gamma": self.gamma,
            "image": self.image.to_json(),
            "covers": self.covers,
            "proportional_defect": self.proportional_defect,
            "epsilon": self.epsilon,
            "height_ratio": self.height_ratio,
            "delta_ok": self.height_ratio >= 1 - self.delta,
            "displayed_covered": self.displayed_covered,
            "passed": self.passed,
        }


def _proportional_defect(ys: np.ndarray, depth: int) -> float:
    """max over dyadic J~ of |lambda(I cap Phi^-1 J~)/lambda(I) - lambda(J~)/lambda(J)| / (lambda(J~)/lambda(J))."""
    us = np.linspace(0.0, 1.0, len(ys))
    if ys[-1] < ys[0]:
        ys, us = ys[::-1], us[::-1]
    if np.any(np.diff(ys) <= 0):
        return math.inf
    lo, hi = float(ys[0]), float(ys[-1])
    worst = 0.0
    for d in range(1, depth + 1):
        ratio = 1.0 / 2**d
        edges = lo + (hi - lo) * np.arange(2**d + 1) * ratio
        at = np.interp(edges, ys, us)
        fractions = np.abs(np.diff(at))
        worst = max(worst, float(np.max(np.abs(fractions - ratio)) / ratio))
    return worst


def distribution_test(
    stage: StageBundle,
    interval: DecompositionInterval,
    samples: int = 513,
    depth: int = 6,
) -> DistributionReport:
    """Push a decomposition interval through Phi_n and check the vertical distribution.

    Checks, with gamma = 1/(n q_n^sigma) and epsilon = 1/n: the image is
    gamma-thin in x, spans the predicted vertical extent, and spreads
    the length of the interval proportionally over every dyadic
    subinterval of its extent (down to ``depth`` halvings).
    """
    if samples < 3:
        raise ParameterError(f"distribution test needs at least 3 samples, got {samples}")
    n, r = stage.n, stage.params.r
    if not 0 <= interval.j < stage.q_n:
        raise ParameterError(f"column index j must lie in [0, {stage.q_n}), got {interval.j}")
    known = decomposition_intervals(stage, interval.t, [interval.y], [interval.j])
    if not any(iv.kind == interval.kind and iv.x == interval.x for iv in known):
        raise ParameterError(f"{interval.kind}[{interval.j}] at t={interval.t} is not an interval of the decomposition")
    phi_map = mixing_map(stage)
    xs = np.linspace(float(interval.x.lo), float(interval.x.hi), samples)
    xs = wrap_unit(xs)
    ys = np.full(samples, interval.y)
    ix, iy = phi_map.apply(xs, ys)
    gamma = 1.0 / (n * stage.q_n**stage.params.sigma)
    lo, hi = float(iy.min()), float(iy.max())
    tol = config.tau_geo
    pred = interval.image_y
    covers = abs(lo - float(pred.lo)) <= tol and abs(hi - float(pred.hi)) <= tol
    band_margin = 2.0 / (3 * n * r)
    displayed = lo <= interval.t / r + band_margin + tol and hi >= (interval.t + 1) / r - band_margin - tol
    return DistributionReport(
        interval=interval,
        x_spread=circle_spread(ix),
        gamma=gamma,
        image=Interval(lo, hi),
        covers=covers,
        proportional_defect=_proportional_defect(iy, depth),
        epsilon=1.0 / n,
        height_ratio=(hi - lo) * r,
        delta=1.0 / n,
        displayed_covered=displayed,
    )


# ---------------------------------------------------------------------------
# Minimality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinimalityReport:
    grid: GridSpec
    visited: int
    orbit_length: int
    period: int
    applicable: bool = True

    @property
    def coverage(self) -> float:
        return self.visited / self.grid.cell_count

    @property
    def truncated(self) -> bool:
        return self.orbit_length < self.period

    @property
    def passed(self) -> bool:
        return self.visited == self.grid.cell_count

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": [self.grid.nx, self.grid.ny],
            "visited": self.visited,
            "coverage": self.coverage,
            "orbit_length": self.orbit_length,
            "truncated": self.truncated,
            "applicable": self.applicable,
            "passed": self.passed,
        }


def visit_coverage(
    system: ConjugatedRotation,
    inner: TorusMap,
    point: TorusPoint,
    grid: GridSpec,
    m: Optional[int] = None,
) -> MinimalityReport:
    """Cells of ``grid`` hit by inner(S^k(H^-1 x)), k < m (default one period)."""
    length = system.q if m is None else m
    base = system.H_inv.eval(point)  # type: ignore[union-attr]
    seen = np.zeros(grid.cell_count, dtype=bool)
    for _, bx, by in base_orbit_chunks(system, base, length):
        ux, uy = inner.apply(bx, by)
        i, j = locate_cells(ux, uy, grid)
        seen[i * grid.ny + j] = True
    return MinimalityReport(grid, int(seen.sum()), length, system.q)


def minimality_visit_test(
    stage: StageBundle,
    point: Optional[TorusPoint] = None,
    m: Optional[int] = None,
) -> MinimalityReport:
    """Coverage of the q_n x l_n grid by the orbit in the coordinates g_n^-1 H_(n-1)^-1.

    Raises:
        ParameterError: For the Cantor variants
    """
    if stage.variant != "A":
        raise ParameterError("the minimality visit test applies to variant A")
    x = point if point is not None else designated_generic_point(stage).point
    report = visit_coverage(stage.system, stage.inner, x, GridSpec(stage.q_n, stage.l_n), m)
    return MinimalityReport(report.grid, report.visited, report.orbit_length, report.period, minimality_applicable(stage))


def visit_counts_naive(
    system: ConjugatedRotation,
    inner: TorusMap,
    point: TorusPoint,
    grid: GridSpec,
    m: int,
) -> set[tuple[int, int]]:
    """Oracle for ``visit_coverage``: the visited (column, row) cells, one orbit point at a time."""
    base = system.H_inv.eval(point)  # type: ignore[union-attr]
    step = Fraction(system.p, system.q)
    seen = set()
    for k in range(m):
        shifted = TorusPoint(float(Fraction(base.x) + k * step) % 1.0, base.y)
        seen.add(locate_cell(inner.eval(shifted), grid))
    return seen


# ---------------------------------------------------------------------------
# Counting and trapping
# ---------------------------------------------------------------------------


def equidistribution_counts(chunks: Chunks, grid: GridSpec) -> np.ndarray:
    """Number of streamed points in each grid cell, indexed i * ny + j."""
    counts = np.zeros(grid.cell_count, dtype=np.int64)
    for _, xs, ys in chunks:
        i, j = locate_cells(xs, ys, grid)
        counts += np.bincount(i * grid.ny + j, minlength=grid.cell_count)
    return counts


def family_counts(chunks: Chunks, family: RegionFamily) -> tuple[np.ndarray, int]:
    """Per-rectangle counts of streamed points in a family and the number outside it."""
    size = family.copies * len(family.rects)
    counts = np.zeros(size, dtype=np.int64)
    outside = 0
    for _, xs, ys in chunks:
        idx = family.locate(xs, ys)
        hit = idx >= 0
        counts += np.bincount(idx[hit], minlength=size)
        outside += int((~hit).sum())
    return counts, outside


def _golden_offset(q: int) -> float:
    # off every rational cell edge of the stage
    return (math.sqrt(5.0) - 1.0) / (2.0 * q)


@dataclass(frozen=True)
class CellCountReport:
    family: str
    counts: np.ndarray
    outside: int
    bound: int

    @property
    def min_count(self) -> int:
        return int(self.counts.min()) if len(self.counts) else 0

    @property
    def passed(self) -> bool:
        return self.min_count >= self.bound

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "cells": int(len(self.counts)),
            "min_count": self.min_count,
            "max_count": int(self.counts.max()) if len(self.counts) else 0,
            "outside": self.outside,
            "bound": self.bound,
            "passed": self.passed,
        }


def generic_cell_counts(stage: StageBundle, y: Optional[float] = None) -> CellCountReport:
    """Visits of a base orbit through B to the cells Y_(n,i,j) = phi^g(G_(n,i,s-1-j)).

    A full period of a horizontal line at height y in (2 eps2, eps3) puts
    at least floor((1 - 4 eps2) q_(n+1) / (s_n q_n)) points in every cell.
    """
    if stage.variant != "A":
        raise ParameterError("generic cell counts apply to variant A")
    eps2, eps3 = stage.eps.eps2, stage.eps.eps3
    height = float((2 * eps2 + eps3) / 2) if y is None else y  # type: ignore[operator]
    base = TorusPoint(_golden_offset(stage.q_next), height)
    system = stage.system
    chunks = ((i, *stage.inner.apply(bx, by)) for i, bx, by in base_orbit_chunks(system, base, stage.q_next))
    counts, outside = family_counts(chunks, stage.catalog["Y_GEN"])
    bound = math.floor((1 - 4 * eps2) * stage.q_next / (stage.s_n * stage.q_n))  # type: ignore[operator]
    return CellCountReport("Y_GEN", counts, outside, int(bound))


@dataclass(frozen=True)
class TrappingReport:
    """Visits of the base orbit of a point of T x I_t1 to the trapping cells X_(n,i1,t1)."""

    t1: int
    base: TorusPoint
    counts: np.ndarray
    excluded: int
    outside: int
    total: int
    bound: float

    @property
    def conserved(self) -> bool:
        return int(self.counts.sum()) + self.excluded + self.outside == self.total

    @property
    def min_count(self) -> int:
        return int(self.counts.min())

    @property
    def passed(self) -> bool:
        return self.conserved and self.min_count >= self.bound

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t1": self.t1,
            "base": self.base.to_json(),
            "cells": int(len(self.counts)),
            "min_count": self.min_count,
            "max_count": int(self.counts.max()),
            "excluded": self.excluded,
            "outside": self.outside,
            "total": self.total,
            "bound": self.bound,
            "conserved": self.conserved,
            "passed": self.passed,
        }


def _kept_interval(stage: StageBundle, t1: int) -> Interval:
    if stage.exchange is None:
        raise ParameterError("trapping cells exist for the Cantor variants only")
    fam = stage.catalog["GEN_CELLS"]
    for label, rect in zip(fam.labels, fam.rects):
        if label == (0, t1):
            return Interval(rect.y0, rect.y1)
    raise ParameterError(f"kept strip index t1 must lie in [0, {2**stage.n}), got {t1}")


def trapping_base_point(stage: StageBundle, t1: int, relative_height: float = 0.5) -> TorusPoint:
    """A base point of T x I_t1, kept clear of the strip ends by the kappa shift."""
    iv = _kept_interval(stage, t1)
    length = float(iv.hi) - float(iv.lo)
    shift = stage.kappa.peak
    if shift >= length:
        raise ParameterError(f"kappa height {shift} exceeds the kept strip length {length}")
    return TorusPoint(_golden_offset(stage.q_next), float(iv.lo) + relative_height * (length - shift))


def trapping_count_test(stage: StageBundle, t1: int, base: Optional[TorusPoint] = None) -> TrappingReport:
    """Count one full base period in X_(n,i1,t1) = P^-1(cell minus E_n) for every i1.

    The bound is (1 - 2/n^2) q_(n+1) |I_t1| / (s_n q_n), which is
    (1 - 2/n^2) q_(n+1) / (3^n s_n q_n) for the middle-third set.
    """
    iv = _kept_interval(stage, t1)
    point = base if base is not None else trapping_base_point(stage, t1)
    fam = stage.catalog["GEN_CELLS"]
    e_n = stage.catalog["E_N"]
    s, q = stage.s_n, stage.q_n
    label_c = np.array([lab[0] for lab in fam.labels], dtype=np.int64)
    label_l = np.array([lab[1] for lab in fam.labels], dtype=np.int64)
    counts = np.zeros(s * q, dtype=np.int64)
    excluded = outside = 0
    for _, bx, by in base_orbit_chunks(stage.system, point, stage.q_next):
        u, v = stage.P.apply(bx, by)
        idx = fam.locate(u, v)
        local = np.where(idx >= 0, idx % len(fam.rects), 0)
        col = np.where(idx >= 0, idx // len(fam.rects), 0)
        in_strip = (idx >= 0) & (label_l[local] == t1)
        excl = e_n.contains_arrays(u, v)
        counted = in_strip & ~excl
        counts += np.bincount((col * s + label_c[local])[counted], minlength=s * q)
        excluded += int((in_strip & excl).sum())
        outside += int((~in_strip).sum())
    length = float(iv.hi) - float(iv.lo)
    bound = (1 - 2 / stage.n**2) * stage.q_next * length / (s * q)
    return TrappingReport(t1, point, counts, excluded, outside, stage.q_next, bound)


def trapping_counts_naive(stage: StageBundle, t1: int, base: TorusPoint) -> tuple[List[int], int, int]:
    """Oracle for ``trapping_count_test``: one point at a time against every rectangle on the torus."""
    fam = stage.catalog["GEN_CELLS"]
    cells = [(col, label, rect) for col, label, rect in fam.rects_on_torus()]
    margins = [rect for _, _, rect in stage.catalog["E_N"].rects_on_torus()]
    s = stage.s_n
    counts = [0] * (s * stage.q_n)
    excluded = outside = 0
    step = Fraction(stage.p_next, stage.q_next)
    for i in range(stage.q_next):
        x = (float(base.x) + float((i * step) % 1)) % 1.0
        p = stage.P.eval(TorusPoint(x, float(base.y)))
        hit = None
        for col, label, rect in cells:
            if label[1] == t1 and rect.contains(p.x, p.y):
                hit = col * s + label[0]
                break
        if hit is None:
            outside += 1
        elif any(rect.contains(p.x, p.y) for rect in margins):
            excluded += 1
        else:
            counts[hit] += 1
    return counts, excluded, outside


# ---------------------------------------------------------------------------
# Confinement of non-generic orbits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfinementResult:
    base: TorusPoint
    cell: tuple[int, ...]
    band: Interval
    min_y: float
    max_y: float
    mean_y: float
    points: int

    @property
    def inside(self) -> bool:
        tol = config.tau_geo
        return self.min_y >= float(self.band.lo) - tol and self.max_y < float(self.band.hi) + tol

    @property
    def deviation(self) -> float:
        return abs(self.mean_y - 0.5)

    @property
    def deviation_required(self) -> bool:
        """Bands inside the lower half, such as that of the first level-1 gap piece, must keep the mean 1/4 from 1/2."""
        return float(self.band.lo) == 0.0 and float(self.band.hi) <= 0.5

    @property
    def deviation_ok(self) -> bool:
        return self.deviation >= 0.25 or not self.deviation_required

    @property
    def indicator_deviation(self) -> float:
        """|average - integral| of the band indicator: every point is inside, the band has measure < 1."""
        return 1.0 - float(self.band.length) if self.inside else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "base": self.base.to_json(),
            "cell": list(self.cell),
            "band": self.band.to_json(),
            "min_y": self.min_y,
            "max_y": self.max_y,
            "mean_y": self.mean_y,
            "deviation": self.deviation,
            "deviation_required": self.deviation_required,
            "deviation_ok": self.deviation_ok,
            "indicator_deviation": self.indicator_deviation,
            "inside": self.inside,
            "points": self.points,
        }


@dataclass(frozen=True)
class ConfinementReport:
    results: tuple[ConfinementResult, ...]
    skipped: tuple[str, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(r.inside and r.deviation_ok for r in self.results)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "results": [r.to_dict() for r in self.results],
            "skipped": list(self.skipped),
            "passed": self.passed,
        }


def _confined_family(stage: StageBundle) -> tuple[RegionFamily, str]:
    # variant E confines the kept strips, C and D the gap pieces
    if stage.variant == "E":
        return stage.catalog["GEN_CELLS"], "I"
    return stage.catalog["NONGEN_CELLS"], "J"


def confinement_band(stage: StageBundle, label: tuple[int, ...]) -> Interval:
    """Vertical band that h_n sends the confined cell with this label into."""
    if stage.exchange is None:
        raise ParameterError("confinement bands exist for the Cantor variants only")
    _, family = _confined_family(stage)
    if family == "I":
        _, strip = label
        level = 0
    else:
        _, level, strip = label
    targets = [
        p.target
        for p in stage.exchange.template
        if p.cell.family == family and p.cell.level == level and p.cell.strip == strip
    ]
    if not targets:
        raise ParameterError(f"no exchange piece for cell {label}")
    return Interval(min(t.y0 for t in targets), max(t.y1 for t in targets))


CONFINEMENT_MIN_POINTS = 20
# Base heights sit below this fraction of a cell's usable height
CONFINEMENT_HEIGHT_CEILING = 0.4


def confinement_base_points(
    stage: StageBundle, min_points: int = CONFINEMENT_MIN_POINTS
) -> tuple[List[TorusPoint], List[str]]:
    """Base points at several heights in every confined cell of every sub-column.

    Each cell gets the same number of heights, spread evenly over the lower
    part of the cell, until at least ``min_points`` points are placed. Cells
    shorter than the kappa height are skipped with a note.
    """
    fam, _ = _confined_family(stage)
    shift = stage.kappa.peak
    cells: List[tuple[float, float, float]] = []
    skipped: List[str] = []
    for label, rect in zip(fam.labels, fam.rects):
        length = float(rect.height)
        if shift >= length:
            skipped.append(f"cell {label}: length {length:.3g} below the kappa height {shift:.3g}")
            continue
        cx, _ = rect.center
        cells.append((cx, float(rect.y0), length - shift))
    if not cells:
        return [], skipped
    heights = -(-min_points // len(cells))
    points = [
        TorusPoint(cx, y0 + CONFINEMENT_HEIGHT_CEILING * (j + 0.5) / heights * usable)
        for cx, y0, usable in cells
        for j in range(heights)
    ]
    return points, skipped


def nongeneric_trap_test(
    stage: StageBundle,
    base_points: Optional[Sequence[TorusPoint]] = None,
    m: Optional[int] = None,
) -> ConfinementReport:
    """Follow h_n(S^i x) for base points x in confined cells and check they stay in the predicted band.

    Raises:
        ParameterError: If a base point lies in no confined cell
    """
    fam, _ = _confined_family(stage)
    skipped: List[str] = []
    if base_points is None:
        base_points, skipped = confinement_base_points(stage)
    length = stage.q_next if m is None else m
    results = []
    for base in base_points:
        idx = fam.locate(np.array([float(base.x)]), np.array([float(base.y)]))[0]
        if idx < 0:
            raise ParameterError(f"base point {base.to_json()} lies in no confined cell of {fam.name}")
        _, label = fam.split_index(int(idx))
        band = confinement_band(stage, label)
        lo, hi = math.inf, -math.inf
        acc = BirkhoffSum()
        for _, bx, by in base_orbit_chunks(stage.system, base, length):
            _, ys = stage.inner.apply(bx, by)
            lo, hi = min(lo, float(ys.min())), max(hi, float(ys.max()))
            acc.add(ys)
        results.append(ConfinementResult(base, label, band, lo, hi, acc.mean(), acc.count))
    return ConfinementReport(tuple(results), tuple(skipped))


# ---------------------------------------------------------------------------
# Map-level checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MapCheck:
    name: str
    label: str
    samples: int
    max_defect: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_defect <= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "map": self.label,
            "samples": self.samples,
            "max_defect": self.max_defect,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def area_preservation_test(m: TorusMap, samples: Optional[int] = None, seed: Optional[int] = None) -> MapCheck:
    """sup |det Dm - 1| over quasi-random points."""
    count = samples or config.stratified_samples
    xs, ys = sobol_points(count, config.seed if seed is None else seed)
    det = m.jacobian_determinant(xs, ys)
    return MapCheck("area_preservation", m.label, count, float(np.max(np.abs(det - 1.0))), config.tau_jac)


def inverse_test(m: TorusMap, samples: Optional[int] = None, seed: Optional[int] = None) -> MapCheck:
    """sup d0(m^-1(m(p)), p) over quasi-random points."""
    count = samples or config.stratified_samples
    xs, ys = sobol_points(count, config.seed if seed is None else seed)
    bx, by = m.apply_inverse(*m.apply(xs, ys))
    return MapCheck("inverse", m.label, count, float(torus_distance(bx, by, xs, ys).max()), config.tau_map)


def commutation_test(
    m: TorusMap,
    shift: Fraction,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> MapCheck:
    """sup d0(m(S p), S(m p)) for the horizontal rotation S by ``shift``."""
    count = samples or config.stratified_samples
    xs, ys = sobol_points(count, config.seed if seed is None else seed)
    dx = float(Fraction(shift) % 1)
    ax, ay = m.apply(wrap_unit(xs + dx), ys)
    bx, by = m.apply(xs, ys)
    defect = torus_distance(ax, ay, wrap_unit(bx + dx), by)
    return MapCheck("commutation", m.label, count, float(defect.max()), config.tau_map)


@dataclass(frozen=True)
class AlignmentReport:
    samples: int
    in_aligned: float
    in_displayed: float

    @property
    def passed(self) -> bool:
        return self.in_aligned == 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "samples": self.samples,
            "in_Y": self.in_aligned,
            "in_Y_literal": self.in_displayed,
            "passed": self.passed,
        }


def double_rotation_alignment(stage: StageBundle, samples: int = 4096) -> AlignmentReport:
    """Fraction of phi^g(B) landing in the left strip Y and in the right-hand strip Y_literal."""
    if stage.variant != "A":
        raise ParameterError("the double rotation belongs to variant A")
    phi_g = build_phi_g(stage.n, stage.q_n, stage.params.r)
    rect = stage.catalog["B"].rects[0]
    xs, ys = rect.sample(samples)
    ux, uy = phi_g.apply(xs, ys)
    aligned = float(stage.catalog["Y"].contains_arrays(ux, uy).mean())
    displayed = float(stage.catalog["Y_literal"].contains_arrays(ux, uy).mean())
    return AlignmentReport(len(xs), aligned, displayed)


# ---------------------------------------------------------------------------
# Dimension
# ---------------------------------------------------------------------------

DIMENSION_TOLERANCE = 0.06


@dataclass(frozen=True)
class DimensionReport:
    label: str
    result: BoxCountResult
    lower: float
    upper: float

    @property
    def within(self) -> bool:
        est = self.result.estimate
        return self.lower - DIMENSION_TOLERANCE <= est <= self.upper + DIMENSION_TOLERANCE

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "box_count": self.result.to_dict(),
            "lower": self.lower,
            "upper": self.upper,
            "within": self.within,
        }


def product_dimension_check(spec: CantorSpec, depth: int = 8) -> DimensionReport:
    """Box dimension of T x C_depth against 1 + dim C."""
    result = product_box_dimension(spec, depth)
    target = 1.0 + spec.dimension
    return DimensionReport("T x C", result, target, target)


def generic_set_dimension(stage: StageBundle, depth: int = 6, max_x_count: int = 2**12) -> DimensionReport:
    """Box dimension of H_n(T x C_depth), expected between dim C and 1 + dim C.

    At the coarse scales a finite stage can reach the verdict is indicative
    only; the report states whether the estimate falls inside the window.
    When fewer than 3 Cantor scales are resolvable on the x grid, powers of
    1/4 down to the grid resolution are used instead.
    """
    spec = stage.params.cantor
    if spec is None:
        raise ParameterError("generic set dimension applies to the Cantor variants")
    scales = [d for d in default_cantor_scales(spec, depth) if d * max_x_count >= 2.0]
    if len(scales) < 3:
        # gaps decay too fast for the grid: fall back to powers of 1/4 down to its resolution
        scales = [4.0**-k for k in range(1, int(math.log(max_x_count / 2.0, 4)) + 1)]
    x_count = 2 * int(math.ceil(1.0 / min(scales)))
    pts = product_set_points(spec, depth, x_count)
    hx, hy = stage.H.apply(pts[:, 0].copy(), pts[:, 1].copy())
    result = box_dimension(np.column_stack([hx, hy]), scales)
    return DimensionReport(f"H_{stage.n}(T x C)", result, spec.dimension, 1.0 + spec.dimension)


def cantor_dimension_series(spec: CantorSpec, depths: Sequence[int]) -> List[tuple[int, BoxCountResult]]:
    """Box dimension of the depth-k kept intervals for each k.

    Raises:
        ParameterError: If a depth gives fewer than 3 scales or less than two decades
    """
    return [(k, cantor_box_dimension(spec, k)) for k in depths]
