"""Measure-preserving rectangle exchanges of the torus.

All three exchange families share one 1/q_n-periodic column layout. Each
column [i/q_n, (i+1)/q_n) is cut into s_n sub-columns, and each sub-column
into horizontal strips: the kept Cantor intervals and the gap pieces. Every
such cell is then sent by an affine piece to a target rectangle:

* variants C and D send kept strips to full-height columns, side by side at
  partial-sum offsets, with one sub-column per horizontal band; gap pieces of
  level k go to a block starting at sum |I^k| / q_n, into bands proportional
  to their lengths;
* variant E sends kept strip l into the dyadic band [l/2^n, (l+1)/2^n) at the
  right end of the column. Each gap piece is cut along x into one piece per
  band; a quarter turn stands every piece up across the staircase left free
  in its band, so a horizontal gap line meets every band.

Templates are kept for column 0 only; the other columns are translates.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterator, List, NamedTuple, Optional, Sequence

import numpy as np

from .cantor import CantorSpec, CantorStage, cantor_stage
from .errors import ConstructionError, ParameterError
from .maps import TorusMap, register_map
from .numerics import Interval, Rect, RectLocator, TorusPoint, rat_mod1, wrap_unit

VARIANTS = ("C", "D", "E")


class Orientation(Enum):
    """Affine action of a piece in normalized (u, v) coordinates."""

    TRANSLATE = "translate-rescale"
    QUARTER_CW = "quarter-turn-cw"  # (u, v) -> (v, 1 - u)
    QUARTER_CCW = "quarter-turn-ccw"  # (u, v) -> (1 - v, u)

    def inverted(self) -> "Orientation":
        if self is Orientation.QUARTER_CW:
            return Orientation.QUARTER_CCW
        if self is Orientation.QUARTER_CCW:
            return Orientation.QUARTER_CW
        return self


class CellIndex(NamedTuple):
    """Source cell: family "I" (kept strip, level 0) or "J" (gap piece at level k).

    ``column`` is the global sub-column i1 in [0, s_n q_n); ``strip`` is l for
    kept strips and the piece index within its level for gaps; ``band`` is the
    dyadic band of a split gap cell (variant E) and -1 otherwise. Split gap
    cells span a whole q_n column and carry its first sub-column.
    """

    family: str
    level: int
    strip: int
    column: int
    band: int = -1


class TargetIndex(NamedTuple):
    """Target cell: V (j1, j2=l, j3=c), W (j1, j2', k), K (j1, l, c) or S (j1, band, piece)."""

    family: str
    j1: int
    j2: int
    j3: int


@dataclass(frozen=True)
class ExchangePiece:
    source: Rect
    target: Rect
    orientation: Orientation
    cell: CellIndex
    image: TargetIndex

    def transposed(self) -> "ExchangePiece":
        return ExchangePiece(self.target, self.source, self.orientation.inverted(), self.cell, self.image)

    def map_exact(self, x: Fraction, y: Fraction) -> tuple[Fraction, Fraction]:
        """Exact affine image of a point of the source rectangle."""
        u = (x - self.source.x0) / self.source.width
        v = (y - self.source.y0) / self.source.height
        if self.orientation is Orientation.QUARTER_CW:
            u, v = v, 1 - u
        elif self.orientation is Orientation.QUARTER_CCW:
            u, v = 1 - v, u
        return self.target.x0 + self.target.width * u, self.target.y0 + self.target.height * v


@dataclass(frozen=True)
class PartitionCheck:
    """Exact tiling bookkeeping for the source and target sides of an exchange."""

    source_tiles: bool
    target_tiles: bool
    source_area_defect: Fraction
    target_area_defect: Fraction
    unbalanced_pieces: int

    @property
    def exact(self) -> bool:
        return (
            self.source_tiles
            and self.target_tiles
            and self.source_area_defect == 0
            and self.target_area_defect == 0
            and self.unbalanced_pieces == 0
        )


def _tiles_column(rects: Sequence[Rect], width: Fraction) -> bool:
    edges = sorted({r.x0 for r in rects} | {r.x1 for r in rects})
    if not edges or edges[0] != 0 or edges[-1] != width:
        return False
    for lo, hi in zip(edges, edges[1:]):
        crossing = sorted((r for r in rects if r.x0 <= lo and r.x1 >= hi), key=lambda r: r.y0)
        partial = [r for r in rects if r.x0 < hi and r.x1 > lo and not (r.x0 <= lo and r.x1 >= hi)]
        if partial:
            return False
        top = Fraction(0)
        for r in crossing:
            if r.y0 != top:
                return False
            top = r.y1
        if top != 1:
            return False
    return True


@dataclass(frozen=True)
class RectExchange:
    """Piecewise-affine permutation of the torus, stored as a one-column template."""

    variant: str
    n: int
    q_n: int
    s_n: int
    template: tuple[ExchangePiece, ...]
    cantor: Optional[CantorSpec] = None
    advisories: tuple[str, ...] = field(default_factory=tuple)
    inverted: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "_source_locator", RectLocator([p.source for p in self.template]))
        object.__setattr__(self, "_target_locator", RectLocator([p.target for p in self.template]))
        object.__setattr__(self, "_params", _piece_arrays(self.template))

    @property
    def column_width(self) -> Fraction:
        return Fraction(1, self.q_n)

    def pieces(self) -> Iterator[ExchangePiece]:
        """Every piece over the whole torus, column by column."""
        for i in range(self.q_n):
            dx = Fraction(i, self.q_n)
            for p in self.template:
                yield ExchangePiece(
                    p.source.shifted(dx),
                    p.target.shifted(dx),
                    p.orientation,
                    p.cell._replace(column=p.cell.column + i * self.s_n),
                    p.image._replace(j1=i),
                )

    def transposed(self) -> "RectExchange":
        return RectExchange(
            self.variant,
            self.n,
            self.q_n,
            self.s_n,
            tuple(p.transposed() for p in self.template),
            self.cantor,
            self.advisories,
            not self.inverted,
        )

    def partition_check(self) -> PartitionCheck:
        width = self.column_width
        sources = [p.source for p in self.template]
        targets = [p.target for p in self.template]
        return PartitionCheck(
            source_tiles=_tiles_column(sources, width),
            target_tiles=_tiles_column(targets, width),
            source_area_defect=sum((r.area for r in sources), Fraction(0)) - width,
            target_area_defect=sum((r.area for r in targets), Fraction(0)) - width,
            unbalanced_pieces=sum(1 for p in self.template if p.source.area != p.target.area),
        )

    def _split(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        col = np.clip(np.floor(xs * self.q_n), 0, self.q_n - 1)
        return col, xs - col / self.q_n

    def apply_arrays(self, xs: np.ndarray, ys: np.ndarray, inverse: bool = False) -> tuple[np.ndarray, np.ndarray]:
        col, local = self._split(xs)
        params = self._params
        if inverse:
            idx = self._target_locator.locate(local, ys)  # type: ignore[attr-defined]
            src, dst, orient = params["target"], params["source"], -params["orient"]
        else:
            idx = self._source_locator.locate(local, ys)  # type: ignore[attr-defined]
            src, dst, orient = params["source"], params["target"], params["orient"]
        s = src[idx]
        d = dst[idx]
        o = orient[idx]
        u = (local - s[:, 0]) / s[:, 2]
        v = (ys - s[:, 1]) / s[:, 3]
        cw = o == 1
        ccw = o == -1
        u2 = np.where(cw, v, np.where(ccw, 1.0 - v, u))
        v2 = np.where(cw, 1.0 - u, np.where(ccw, u, v))
        out_x = d[:, 0] + d[:, 2] * u2 + col / self.q_n
        out_y = d[:, 1] + d[:, 3] * v2
        return wrap_unit(out_x), wrap_unit(out_y)

    def piece_jacobians(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        _, local = self._split(xs)
        idx = self._source_locator.locate(local, ys)  # type: ignore[attr-defined]
        return self._params["jacobian"][idx]

    def locate_source(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Template index of the source piece containing each point."""
        _, local = self._split(xs)
        return self._source_locator.locate(local, ys)  # type: ignore[attr-defined]

    def to_rows(self) -> List[List[str]]:
        """CSV rows describing every piece of the torus."""
        rows = []
        for p in self.pieces():
            rows.append(
                [
                    p.cell.family,
                    str(p.cell.level),
                    str(p.cell.strip),
                    str(p.cell.column),
                    str(p.cell.band),
                    *p.source.to_json(),
                    p.image.family,
                    str(p.image.j1),
                    str(p.image.j2),
                    str(p.image.j3),
                    *p.target.to_json(),
                    p.orientation.value,
                ]
            )
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant,
            "n": self.n,
            "q_n": self.q_n,
            "s_n": self.s_n,
            "cantor": self.cantor.to_dict() if self.cantor else None,
        }


ROW_HEADER = [
    "family",
    "level",
    "strip",
    "column",
    "band",
    "src_x0",
    "src_x1",
    "src_y0",
    "src_y1",
    "target_family",
    "j1",
    "j2",
    "j3",
    "dst_x0",
    "dst_x1",
    "dst_y0",
    "dst_y1",
    "orientation",
]


def _piece_arrays(template: Sequence[ExchangePiece]) -> Dict[str, np.ndarray]:
    def box(r: Rect) -> List[float]:
        return [float(r.x0), float(r.y0), float(r.width), float(r.height)]

    orient = np.array(
        [
            1 if p.orientation is Orientation.QUARTER_CW else -1 if p.orientation is Orientation.QUARTER_CCW else 0
            for p in template
        ],
        dtype=np.int64,
    )
    jac = np.zeros((len(template), 2, 2))
    for i, p in enumerate(template):
        sw, sh = float(p.source.width), float(p.source.height)
        tw, th = float(p.target.width), float(p.target.height)
        if orient[i] == 1:
            jac[i] = [[0.0, tw / sh], [-th / sw, 0.0]]
        elif orient[i] == -1:
            jac[i] = [[0.0, -tw / sh], [th / sw, 0.0]]
        else:
            jac[i] = [[tw / sw, 0.0], [0.0, th / sh]]
    return {
        "source": np.array([box(p.source) for p in template]).reshape(-1, 4),
        "target": np.array([box(p.target) for p in template]).reshape(-1, 4),
        "orient": orient,
        "jacobian": jac,
    }


def _check_grid(n: int, q_n: int, s_n: int) -> None:
    if n < 1 or q_n < 1 or s_n < 1:
        raise ParameterError(f"exchange needs n, q_n, s_n >= 1, got n={n}, q_n={q_n}, s_n={s_n}")


def _spread_kept_template(stage: CantorStage, q_n: int, s_n: int) -> List[ExchangePiece]:
    """Variants C/D: kept strips to full-height columns, gap pieces to banded blocks."""
    q = Fraction(1, q_n)
    pieces: List[ExchangePiece] = []
    kept = stage.exact_kept()
    offset = Fraction(0)
    for l, iv in enumerate(kept):
        length = iv.hi - iv.lo
        for c in range(s_n):
            source = Rect(q * Fraction(c, s_n), q * Fraction(c + 1, s_n), iv.lo, iv.hi)
            target = Rect(q * offset, q * (offset + length), Fraction(c, s_n), Fraction(c + 1, s_n))
            pieces.append(
                ExchangePiece(source, target, Orientation.QUARTER_CW, CellIndex("I", 0, l, c), TargetIndex("V", 0, l, c))
            )
        offset += length
    for k, level in enumerate(stage.gap_pieces(), start=1):
        block = stage.kept_total_at(k)
        total = sum((g.hi - g.lo for g in level), Fraction(0))
        band = Fraction(0)
        for g_idx, g in enumerate(level):
            length = g.hi - g.lo
            for c in range(s_n):
                source = Rect(q * Fraction(c, s_n), q * Fraction(c + 1, s_n), g.lo, g.hi)
                y0 = (band + length * Fraction(c, s_n)) / total
                y1 = (band + length * Fraction(c + 1, s_n)) / total
                target = Rect(q * block, q * (block + total), y0, y1)
                pieces.append(
                    ExchangePiece(
                        source,
                        target,
                        Orientation.TRANSLATE,
                        CellIndex("J", k, g_idx, c),
                        TargetIndex("W", 0, g_idx * s_n + c, k),
                    )
                )
            band += length
    return pieces


def _confined_kept_template(stage: CantorStage, q_n: int, s_n: int) -> List[ExchangePiece]:
    """Variant E: kept strip l into band [l/2^n, (l+1)/2^n); gap pieces spread over every band."""
    q = Fraction(1, q_n)
    n = stage.depth
    bands = 2**n
    kept = stage.exact_kept()
    widths = [bands * (iv.hi - iv.lo) for iv in kept]
    if any(w > 1 for w in widths):
        raise ConstructionError("a kept interval is longer than 2^-n; dyadic bands cannot hold it")
    free = [1 - w for w in widths]
    gap_list = [g for level in stage.gap_pieces() for g in level]
    gap_levels = [(k, g_idx) for k, level in enumerate(stage.gap_pieces(), start=1) for g_idx in range(len(level))]
    total_gap = sum((g.hi - g.lo for g in gap_list), Fraction(0))
    pieces: List[ExchangePiece] = []
    for l, iv in enumerate(kept):
        x_start = free[l]
        band_lo, band_hi = Fraction(l, bands), Fraction(l + 1, bands)
        for c in range(s_n):
            source = Rect(q * Fraction(c, s_n), q * Fraction(c + 1, s_n), iv.lo, iv.hi)
            x0 = x_start + widths[l] * Fraction(c, s_n)
            x1 = x_start + widths[l] * Fraction(c + 1, s_n)
            target = Rect(q * x0, q * x1, band_lo, band_hi)
            pieces.append(
                ExchangePiece(source, target, Orientation.TRANSLATE, CellIndex("I", 0, l, c), TargetIndex("K", 0, l, c))
            )
    shares = [w / (bands * total_gap) for w in free]
    offset = Fraction(0)
    for flat, g in enumerate(gap_list):
        k, g_idx = gap_levels[flat]
        length = g.hi - g.lo
        cut = Fraction(0)
        for b in range(bands):
            if shares[b] == 0:
                continue
            # a horizontal line of the gap cell turns into a vertical segment across band b
            source = Rect(q * cut, q * (cut + shares[b]), g.lo, g.hi)
            cut += shares[b]
            tx0 = free[b] * offset / total_gap
            tx1 = free[b] * (offset + length) / total_gap
            target = Rect(q * tx0, q * tx1, Fraction(b, bands), Fraction(b + 1, bands))
            pieces.append(
                ExchangePiece(
                    source,
                    target,
                    Orientation.QUARTER_CW,
                    CellIndex("J", k, g_idx, 0, b),
                    TargetIndex("S", 0, b, flat),
                )
            )
        offset += length
    return pieces


def perm_theorem_C(n: int, q_n: int, s_n: int) -> RectExchange:
    """Middle-third exchange: kept cells spread vertically, gap cells confined to bands.

    Raises:
        ParameterError: If s_n <= q_n or any parameter is non-positive
    """
    _check_grid(n, q_n, s_n)
    if s_n <= q_n:
        raise ParameterError(f"exchange needs s_n > q_n, got s_n={s_n}, q_n={q_n}")
    stage = cantor_stage(CantorSpec.middle_third(), n)
    return RectExchange("C", n, q_n, s_n, tuple(_spread_kept_template(stage, q_n, s_n)), stage.spec)


def perm_theorem_D(n: int, q_n: int, s_n: int, spec: CantorSpec) -> RectExchange:
    """Gap-sequence analogue of the middle-third exchange.

    Gap pieces occupy bands whose heights are proportional to their lengths
    within the level; for equal-length gaps these are the bands of height
    1/2^(k-1).
    """
    _check_grid(n, q_n, s_n)
    if s_n <= q_n:
        raise ParameterError(f"exchange needs s_n > q_n, got s_n={s_n}, q_n={q_n}")
    stage = cantor_stage(spec, n)
    advisories = (
        "gap bands derived from area preservation; the displayed band height 1/2^(n-1) "
        "and width sum 2^(n-1)|J| cannot tile for unequal gap lengths",
    )
    return RectExchange("D", n, q_n, s_n, tuple(_spread_kept_template(stage, q_n, s_n)), spec, advisories)


def perm_theorem_E(n: int, q_n: int, s_n: int, spec: CantorSpec) -> RectExchange:
    """Exchange with swapped roles: kept cells confined to dyadic bands, gap cells spread."""
    _check_grid(n, q_n, s_n)
    if s_n <= q_n:
        raise ParameterError(f"exchange needs s_n > q_n, got s_n={s_n}, q_n={q_n}")
    stage = cantor_stage(spec, n)
    advisories = (
        "gap strips spread over a staircase in every dyadic band instead of full-height "
        "columns of width |J|/q_n; full-height columns are incompatible with dyadic kept bands",
    )
    return RectExchange("E", n, q_n, s_n, tuple(_confined_kept_template(stage, q_n, s_n)), spec, advisories)


def build_exchange(variant: str, n: int, q_n: int, s_n: int, spec: Optional[CantorSpec] = None) -> RectExchange:
    """Dispatch on the variant letter."""
    if variant == "C":
        return perm_theorem_C(n, q_n, s_n)
    if spec is None:
        raise ParameterError(f"variant {variant} needs a Cantor spec")
    if variant == "D":
        return perm_theorem_D(n, q_n, s_n, spec)
    if variant == "E":
        return perm_theorem_E(n, q_n, s_n, spec)
    raise ParameterError(f"unknown exchange variant {variant!r}")


def exchange_eval(re: RectExchange, p: TorusPoint) -> TorusPoint:
    """Image of p; exact when p has Fraction coordinates."""
    if isinstance(p.x, Fraction) and isinstance(p.y, Fraction):
        col = math.floor(p.x * re.q_n)
        local = p.x - Fraction(col, re.q_n)
        for piece in re.template:
            if piece.source.contains(local, p.y):
                x, y = piece.map_exact(local, p.y)
                return TorusPoint(rat_mod1(x + Fraction(col, re.q_n)), rat_mod1(y))
        raise ConstructionError(f"point {p} is not covered by the exchange template")
    xs, ys = re.apply_arrays(np.array([float(p.x)]), np.array([float(p.y)]))
    return TorusPoint(float(xs[0]), float(ys[0]))


@register_map("exchange")
class ExchangeMap(TorusMap):
    """A RectExchange seen as a TorusMap; its inverse is the transposed exchange."""

    def __init__(self, exchange: RectExchange, label: Optional[str] = None) -> None:
        self.exchange = exchange
        super().__init__(label or f"exchange_{exchange.variant}[{exchange.n}]")

    def apply(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.exchange.apply_arrays(xs, ys)

    def apply_inverse(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.exchange.apply_arrays(xs, ys, inverse=True)

    def jacobian(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return self.exchange.piece_jacobians(xs, ys)

    def inverse(self) -> TorusMap:
        return ExchangeMap(self.exchange.transposed(), label=f"{self.label}^-1")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "label": self.label,
            "exchange": self.exchange.to_dict(),
            "transposed": self.exchange.inverted,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> TorusMap:
        ex = data["exchange"]
        spec = CantorSpec.from_dict(ex["cantor"]) if ex.get("cantor") else None
        built = build_exchange(ex["variant"], ex["n"], ex["q_n"], ex["s_n"], spec)
        if data.get("transposed"):
            built = built.transposed()
        return cls(built, label=data.get("label"))


def exchange_to_map(re: RectExchange) -> ExchangeMap:
    return ExchangeMap(re)


@dataclass(frozen=True)
class CellImage:
    index: TargetIndex
    target: Rect


def perm_image_bruteforce(
    variant: str,
    n: int,
    q_n: int,
    s_n: int,
    cell: CellIndex,
    spec: Optional[CantorSpec] = None,
) -> CellImage:
    """Target of one source cell, computed straight from the index rules.

    Raises:
        ParameterError: If the cell index is out of range
    """
    if cell.column < 0 or cell.column >= s_n * q_n:
        raise ParameterError(f"column {cell.column} out of range for s_n*q_n={s_n * q_n}")
    j1, c = divmod(cell.column, s_n)
    q = Fraction(1, q_n)
    if variant == "C":
        return _bruteforce_c(n, q, s_n, j1, c, cell)
    if spec is None:
        raise ParameterError(f"variant {variant} needs a Cantor spec")
    stage = cantor_stage(spec, n)
    if variant == "D":
        return _bruteforce_d(stage, q, s_n, j1, c, cell)
    if variant == "E":
        return _bruteforce_e(stage, q, s_n, j1, c, cell)
    raise ParameterError(f"unknown exchange variant {variant!r}")


def matches_bruteforce(re: RectExchange, piece: ExchangePiece, tol: float = 1e-12) -> bool:
    """Whether a piece of ``re`` has the index and target the index rules give its cell."""
    oracle = perm_image_bruteforce(re.variant, re.n, re.q_n, re.s_n, piece.cell, re.cantor)
    if oracle.index != piece.image:
        return False
    ours = (piece.target.x0, piece.target.x1, piece.target.y0, piece.target.y1)
    theirs = (oracle.target.x0, oracle.target.x1, oracle.target.y0, oracle.target.y1)
    return all(abs(float(a) - float(b)) <= tol for a, b in zip(ours, theirs))


def _bruteforce_c(n: int, q: Fraction, s_n: int, j1: int, c: int, cell: CellIndex) -> CellImage:
    if cell.family == "I":
        if not 0 <= cell.strip < 2**n:
            raise ParameterError(f"kept index {cell.strip} out of range")
        j2, j3 = cell.strip, c
        x0 = j1 * q + Fraction(j2, 3**n) * q
        target = Rect(x0, x0 + q / 3**n, Fraction(j3, s_n), Fraction(j3 + 1, s_n))
        return CellImage(TargetIndex("V", j1, j2, j3), target)
    k = cell.level
    count = 2 if k == 1 else 2 ** (k - 1)
    if not 1 <= k <= n or not 0 <= cell.strip < count:
        raise ParameterError(f"gap cell ({k}, {cell.strip}) out of range")
    j2 = cell.strip * s_n + c
    x0 = j1 * q + Fraction(2**k, 3**k) * q
    height = Fraction(1, s_n * count)
    target = Rect(x0, x0 + Fraction(2 ** (k - 1), 3**k) * q, j2 * height, (j2 + 1) * height)
    return CellImage(TargetIndex("W", j1, j2, k), target)


def _lengths(intervals: Sequence[Interval]) -> List[Fraction]:
    return [Fraction(iv.hi) - Fraction(iv.lo) for iv in intervals]


def _bruteforce_d(stage: CantorStage, q: Fraction, s_n: int, j1: int, c: int, cell: CellIndex) -> CellImage:
    if cell.family == "I":
        kept = _lengths(stage.exact_kept())
        if not 0 <= cell.strip < len(kept):
            raise ParameterError(f"kept index {cell.strip} out of range")
        x0 = j1 * q + sum(kept[: cell.strip], Fraction(0)) * q
        target = Rect(x0, x0 + kept[cell.strip] * q, Fraction(c, s_n), Fraction(c + 1, s_n))
        return CellImage(TargetIndex("V", j1, cell.strip, c), target)
    levels = stage.gap_pieces()
    if not 1 <= cell.level <= len(levels) or not 0 <= cell.strip < len(levels[cell.level - 1]):
        raise ParameterError(f"gap cell ({cell.level}, {cell.strip}) out of range")
    lengths = _lengths(levels[cell.level - 1])
    removed_before = sum((sum(_lengths(levels[k]), Fraction(0)) for k in range(cell.level)), Fraction(0))
    total = sum(lengths, Fraction(0))
    x0 = j1 * q + (1 - removed_before) * q
    below = sum(lengths[: cell.strip], Fraction(0))
    share = lengths[cell.strip] / s_n
    target = Rect(x0, x0 + total * q, (below + c * share) / total, (below + (c + 1) * share) / total)
    return CellImage(TargetIndex("W", j1, cell.strip * s_n + c, cell.level), target)


def _bruteforce_e(stage: CantorStage, q: Fraction, s_n: int, j1: int, c: int, cell: CellIndex) -> CellImage:
    bands = 2**stage.depth
    kept = _lengths(stage.exact_kept())
    if cell.family == "I":
        if not 0 <= cell.strip < len(kept):
            raise ParameterError(f"kept index {cell.strip} out of range")
        width = bands * kept[cell.strip] * q
        x_end = j1 * q + q
        x0 = x_end - width + width * Fraction(c, s_n)
        target = Rect(x0, x0 + width / s_n, Fraction(cell.strip, bands), Fraction(cell.strip + 1, bands))
        return CellImage(TargetIndex("K", j1, cell.strip, c), target)
    levels = stage.gap_pieces()
    if not 1 <= cell.level <= len(levels) or not 0 <= cell.strip < len(levels[cell.level - 1]):
        raise ParameterError(f"gap cell ({cell.level}, {cell.strip}) out of range")
    if not 0 <= cell.band < bands:
        raise ParameterError(f"band {cell.band} out of range")
    flat_lengths = [length for level in levels for length in _lengths(level)]
    flat = sum(len(levels[k]) for k in range(cell.level - 1)) + cell.strip
    total_gap = sum(flat_lengths, Fraction(0))
    free = 1 - bands * kept[cell.band]
    before = sum(flat_lengths[:flat], Fraction(0))
    x0 = j1 * q + free * before / total_gap * q
    x1 = j1 * q + free * (before + flat_lengths[flat]) / total_gap * q
    target = Rect(x0, x1, Fraction(cell.band, bands), Fraction(cell.band + 1, bands))
    return CellImage(TargetIndex("S", j1, cell.band, flat), target)
