"""Box-counting dimension of interval unions and point clouds."""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Union

import numpy as np

from .cantor import CantorSpec, cantor_stage
from .errors import ParameterError
from .numerics import Interval

# Box indices are snapped to the nearest integer within this many box widths
_SNAP = 1e-9


@dataclass(frozen=True)
class BoxCountResult:
    """Least-squares slope of log N(delta) against log(1/delta)."""

    estimate: float
    scales: tuple[float, ...]
    counts: tuple[int, ...]
    degenerate: bool = False

    def rows(self) -> List[List[float]]:
        """(log(1/delta), log N) pairs for plotting."""
        return [[-math.log(d), math.log(c)] for d, c in zip(self.scales, self.counts)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "estimate": self.estimate,
            "scales": list(self.scales),
            "counts": list(self.counts),
            "degenerate": self.degenerate,
        }


def _check_scales(scales: Sequence[float]) -> np.ndarray:
    deltas = np.asarray(sorted({float(s) for s in scales}, reverse=True))
    if len(deltas) < 3:
        raise ParameterError(f"box counting needs at least 3 scales, got {len(deltas)}")
    if np.any(deltas <= 0):
        raise ParameterError("box sizes must be positive")
    if deltas[0] / deltas[-1] < 100.0:
        raise ParameterError("box sizes must span at least two decades")
    return deltas


def _count_intervals(intervals: Sequence[Interval], delta: float) -> int:
    lo = np.array([float(iv.lo) for iv in intervals]) / delta
    hi = np.array([float(iv.hi) for iv in intervals]) / delta
    start = np.floor(lo + _SNAP).astype(np.int64)
    end = np.maximum(start, np.ceil(hi - _SNAP).astype(np.int64) - 1)
    order = np.argsort(start, kind="stable")
    start, end = start[order], end[order]
    # union of integer ranges: a range adds the part beyond everything seen so far
    reach = np.maximum.accumulate(end)
    previous = np.concatenate([[start[0] - 1], reach[:-1]])
    fresh = end - np.maximum(start - 1, previous)
    return int(np.clip(fresh, 0, None).sum())


def _count_points(points: np.ndarray, delta: float) -> int:
    cells = np.floor(points / delta + _SNAP).astype(np.int64)
    cells -= cells.min(axis=0)
    keys = np.ravel_multi_index(tuple(cells.T), tuple(cells.max(axis=0) + 1))
    return int(len(np.unique(keys)))


def box_dimension(data: Union[Sequence[Interval], np.ndarray], scales: Sequence[float]) -> BoxCountResult:
    """Estimate the box-counting dimension of a set.

    Args:
        data: Either a list of intervals of the line or an (N, d) point array
        scales: Box sizes; at least 3 distinct values spanning two decades

    Returns:
        BoxCountResult; a set that fits in one box at every scale gets
        estimate 0 with ``degenerate`` set

    Raises:
        ParameterError: If the scale list is too short or too narrow
    """
    deltas = _check_scales(scales)
    if isinstance(data, np.ndarray):
        points = data.reshape(len(data), -1).astype(float)
        if len(points) == 0:
            raise ParameterError("box counting needs a non-empty set")
        counts = [_count_points(points, d) for d in deltas]
    else:
        if not data:
            raise ParameterError("box counting needs a non-empty set")
        counts = [_count_intervals(data, d) for d in deltas]
    if max(counts) <= 1:
        return BoxCountResult(0.0, tuple(deltas.tolist()), tuple(counts), degenerate=True)
    slope, _ = np.polyfit(np.log(1.0 / deltas), np.log(np.asarray(counts, dtype=float)), 1)
    return BoxCountResult(float(slope), tuple(deltas.tolist()), tuple(counts))


def default_cantor_scales(spec: CantorSpec, depth: int, start_level: int = 1) -> List[float]:
    """Mean kept-interval length at levels start_level..depth.

    For the middle-third set these are exactly 3^-k.
    """
    if not 1 <= start_level < depth:
        raise ParameterError(f"need 1 <= start_level < depth, got {start_level}, {depth}")
    stage = cantor_stage(spec, depth)
    return [float(stage.kept_total_at(k)) / 2**k for k in range(start_level, depth + 1)]


def cantor_midpoints(spec: CantorSpec, depth: int) -> np.ndarray:
    """Midpoints of the depth-n kept intervals, one sample per interval."""
    stage = cantor_stage(spec, depth)
    return np.array([float(iv.midpoint) for iv in stage.kept])


def product_set_points(spec: CantorSpec, depth: int, x_count: int) -> np.ndarray:
    """Sample of T^1 x C_depth: a regular x grid times the kept-interval midpoints."""
    if x_count < 1:
        raise ParameterError("x_count must be positive")
    xs = (np.arange(x_count) + 0.5) / x_count
    ys = cantor_midpoints(spec, depth)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def cantor_box_dimension(spec: CantorSpec, depth: int, start_level: int = 1) -> BoxCountResult:
    """Box dimension of the depth-n kept intervals at the default scales."""
    stage = cantor_stage(spec, depth)
    return box_dimension(list(stage.kept), default_cantor_scales(spec, depth, start_level))


def product_box_dimension(spec: CantorSpec, depth: int, start_level: int = 1) -> BoxCountResult:
    """Box dimension of T^1 x C_depth, counted exactly.

    A delta-box column meets the product set in N_C(delta) boxes, and
    ceil(1/delta) columns cover the circle, so N(delta) = N_C(delta) * ceil(1/delta).
    """
    stage = cantor_stage(spec, depth)
    deltas = _check_scales(default_cantor_scales(spec, depth, start_level))
    kept = list(stage.kept)
    counts = [_count_intervals(kept, d) * math.ceil(1.0 / d - _SNAP) for d in deltas]
    slope, _ = np.polyfit(np.log(1.0 / deltas), np.log(np.asarray(counts, dtype=float)), 1)
    return BoxCountResult(float(slope), tuple(deltas.tolist()), tuple(counts))
