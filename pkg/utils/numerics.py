"""Exact circle arithmetic, torus points, half-open intervals and grid cells.

Circle rotations and cell boundaries are exact (``fractions.Fraction``);
map images are binary floats reduced into ``[0, 1)``.
"""

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Sequence, Union

import numpy as np

from .errors import ParameterError

Rational = Fraction
Real = Union[float, Fraction]


def rat_mod1(r: Fraction) -> Fraction:
    """Reduce a rational into [0, 1) exactly.

    Args:
        r: Any rational number

    Returns:
        r - floor(r)
    """
    r = Fraction(r)
    return r - math.floor(r)


def format_rational(r: Fraction) -> str:
    """Serialize a rational as "p/q" (lowest terms, positive denominator)."""
    r = Fraction(r)
    return f"{r.numerator}/{r.denominator}"


def parse_rational(text: str) -> Fraction:
    """Parse a "p/q" (or plain integer) string into a Fraction.

    Raises:
        ParameterError: If the text is not a rational literal
    """
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError, AttributeError) as e:
        raise ParameterError(f"not a rational literal: {text!r}") from e


def wrap_unit(values: np.ndarray) -> np.ndarray:
    """Reduce an array mod 1 into [0, 1), folding the rounding case 1.0 back to 0."""
    out = np.mod(values, 1.0)
    out[out >= 1.0] = 0.0
    return out


def _wrap_scalar(v: Real) -> Real:
    if isinstance(v, Fraction):
        return rat_mod1(v)
    w = float(v) % 1.0
    return 0.0 if w >= 1.0 else w


@dataclass(frozen=True)
class TorusPoint:
    """A point of the 2-torus; both coordinates are reduced into [0, 1)."""

    x: Real
    y: Real

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _wrap_scalar(self.x))
        object.__setattr__(self, "y", _wrap_scalar(self.y))

    def to_json(self) -> List[float]:
        return [float(self.x), float(self.y)]


class Closure(Enum):
    """Endpoint convention of an interval."""

    CLOSED = "[]"
    HALF_OPEN = "[)"
    OPEN = "()"


@dataclass(frozen=True)
class Interval:
    """Interval with exact or float endpoints and an explicit closure kind."""

    lo: Real
    hi: Real
    closure: Closure = Closure.HALF_OPEN

    def __post_init__(self) -> None:
        if self.hi < self.lo:
            raise ParameterError(f"interval with hi < lo: [{self.lo}, {self.hi}]")

    @property
    def length(self) -> Real:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Real:
        return (self.lo + self.hi) / 2

    def contains(self, x: Real) -> bool:
        """Membership honouring the closure kind."""
        if self.closure is Closure.CLOSED:
            return self.lo <= x <= self.hi
        if self.closure is Closure.HALF_OPEN:
            return self.lo <= x < self.hi
        return self.lo < x < self.hi

    def to_json(self) -> Dict[str, str]:
        return {
            "lo": _format_real(self.lo),
            "hi": _format_real(self.hi),
            "closure": self.closure.value,
        }


def _format_real(v: Real) -> str:
    if isinstance(v, Fraction):
        return format_rational(v)
    return repr(float(v))


def interval_intersect_length(a: Interval, b: Interval) -> Real:
    """Length of a ∩ b (closure does not affect length).

    Args:
        a: First interval
        b: Second interval

    Returns:
        Non-negative overlap length
    """
    lo = max(a.lo, b.lo)
    hi = min(a.hi, b.hi)
    if hi <= lo:
        return Fraction(0) if isinstance(lo, Fraction) and isinstance(hi, Fraction) else 0.0
    return hi - lo


@dataclass(frozen=True)
class Rect:
    """Half-open rectangle [x0, x1) x [y0, y1) in torus coordinates."""

    x0: Real
    x1: Real
    y0: Real
    y1: Real

    def __post_init__(self) -> None:
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ParameterError(f"degenerate rectangle {self}")

    @property
    def width(self) -> Real:
        return self.x1 - self.x0

    @property
    def height(self) -> Real:
        return self.y1 - self.y0

    @property
    def area(self) -> Real:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (float(self.x0 + self.x1) / 2, float(self.y0 + self.y1) / 2)

    def shifted(self, dx: Real) -> "Rect":
        return Rect(self.x0 + dx, self.x1 + dx, self.y0, self.y1)

    def contains(self, x: Real, y: Real) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1

    def contains_arrays(self, xs: np.ndarray, ys: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Vectorized containment with an optional outward tolerance."""
        return (
            (xs >= float(self.x0) - tol)
            & (xs < float(self.x1) + tol)
            & (ys >= float(self.y0) - tol)
            & (ys < float(self.y1) + tol)
        )

    def overlap_area(self, other: "Rect") -> Real:
        w = min(self.x1, other.x1) - max(self.x0, other.x0)
        h = min(self.y1, other.y1) - max(self.y0, other.y0)
        if w <= 0 or h <= 0:
            return Fraction(0)
        return w * h

    def sample(self, count: int, margin: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic interior grid of about ``count`` points (rounded to a square)."""
        side = max(1, int(math.isqrt(count)))
        t = (np.arange(side) + 0.5) / side
        u = margin + (1.0 - 2 * margin) * t
        gx, gy = np.meshgrid(u, u, indexing="ij")
        xs = float(self.x0) + float(self.width) * gx.ravel()
        ys = float(self.y0) + float(self.height) * gy.ravel()
        return xs, ys

    def to_json(self) -> List[str]:
        return [_format_real(v) for v in (self.x0, self.x1, self.y0, self.y1)]


class RectLocator:
    """Vectorized point location among pairwise disjoint rectangles.

    The x-axis is cut into slabs at every rectangle edge; inside slab a the
    key a + y is searched in the sorted keys a + y0 of the rectangles
    crossing that slab. Coordinates must lie in [0, 1) vertically.
    """

    def __init__(self, rects: Sequence[Rect]) -> None:
        self.rects = list(rects)
        edges = sorted({r.x0 for r in rects} | {r.x1 for r in rects})
        self.edges = np.array([float(e) for e in edges])
        keys: List[float] = []
        ids: List[int] = []
        for a in range(len(edges) - 1):
            lo, hi = edges[a], edges[a + 1]
            crossing = sorted(
                (i for i, r in enumerate(rects) if r.x0 <= lo and r.x1 >= hi and r.height > 0),
                key=lambda i: rects[i].y0,
            )
            keys.extend(a + float(rects[i].y0) for i in crossing)
            ids.extend(crossing)
        self.keys = np.array(keys)
        self.ids = np.array(ids, dtype=np.int64)
        self.slab_count = max(len(edges) - 1, 1)
        self.bounds = np.array([[float(r.x0), float(r.x1), float(r.y0), float(r.y1)] for r in rects]).reshape(-1, 4)

    def locate(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Index of the rectangle containing each point, assuming the rectangles tile."""
        if len(self.ids) == 0:
            return np.full(len(xs), -1, dtype=np.int64)
        slab = np.clip(np.searchsorted(self.edges, xs, side="right") - 1, 0, self.slab_count - 1)
        pos = np.searchsorted(self.keys, slab + ys, side="right") - 1
        return self.ids[np.clip(pos, 0, len(self.ids) - 1)]

    def locate_strict(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Like ``locate`` but -1 for points outside every rectangle."""
        idx = self.locate(xs, ys)
        if len(self.ids) == 0:
            return idx
        b = self.bounds[idx]
        inside = (xs >= b[:, 0]) & (xs < b[:, 1]) & (ys >= b[:, 2]) & (ys < b[:, 3])
        return np.where(inside, idx, -1)


@dataclass(frozen=True)
class GridSpec:
    """nx-by-ny grid of half-open cells tiling the torus."""

    nx: int
    ny: int
    x_offset: float = 0.0
    y_offset: float = 0.0

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1:
            raise ParameterError(f"grid needs positive dimensions, got {self.nx}x{self.ny}")

    @property
    def cell_count(self) -> int:
        return self.nx * self.ny

    def cell(self, i: int, j: int) -> Rect:
        return Rect(
            Fraction(i, self.nx) + Fraction(self.x_offset),
            Fraction(i + 1, self.nx) + Fraction(self.x_offset),
            Fraction(j, self.ny) + Fraction(self.y_offset),
            Fraction(j + 1, self.ny) + Fraction(self.y_offset),
        )


def locate_cell(p: TorusPoint, g: GridSpec) -> tuple[int, int]:
    """Return the (column, row) of the half-open cell containing p.

    Points on a cell's low edge belong to that cell.
    """
    i = math.floor((p.x - g.x_offset) * g.nx) % g.nx
    j = math.floor((p.y - g.y_offset) * g.ny) % g.ny
    return int(i), int(j)


def locate_cells(xs: np.ndarray, ys: np.ndarray, g: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized locate_cell over coordinate arrays."""
    i = np.floor((xs - g.x_offset) * g.nx).astype(np.int64) % g.nx
    j = np.floor((ys - g.y_offset) * g.ny).astype(np.int64) % g.ny
    return i, j


def circle_diff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Signed circular difference a - b in [-1/2, 1/2)."""
    return np.mod(a - b + 0.5, 1.0) - 0.5


def torus_distance(x1: np.ndarray, y1: np.ndarray, x2: np.ndarray, y2: np.ndarray) -> np.ndarray:
    """d0 on the torus: sup of the per-coordinate circular distances."""
    dx = np.abs(circle_diff(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)))
    dy = np.abs(circle_diff(np.asarray(y1, dtype=float), np.asarray(y2, dtype=float)))
    return np.maximum(dx, dy)


def circle_spread(xs: np.ndarray) -> float:
    """Length of the shortest arc of the circle containing every value in xs."""
    if len(xs) == 0:
        return 0.0
    s = np.sort(np.mod(xs, 1.0))
    gaps = np.diff(np.concatenate([s, [s[0] + 1.0]]))
    return float(1.0 - gaps.max())
