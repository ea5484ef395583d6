"""Named region families of a stage, stored as one-column rectangle templates.

A family is a list of rectangles inside [0, period) x [0, 1) repeated with
that period around the torus. Areas are exact; every family also carries
an independently derived expected area so that the bookkeeping can be
checked. Preimage zones (the trapping sets) are tested through a map.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Sequence

import numpy as np

from .cantor import CantorStage
from .errors import ConstructionError, ParameterError
from .exchange import RectExchange
from .maps import TorusMap, stage_epsilons
from .numerics import Rect, RectLocator, format_rational, rat_mod1


@dataclass(frozen=True)
class RegionFamily:
    """Rectangles of one column, repeated with ``period`` over the torus.

    Attributes:
        name: Catalog key
        rects: Template rectangles inside [0, period) x [0, 1)
        labels: Per-rectangle index tuple (t, j, k, ... as the family defines)
        period: Column width 1/k
        expected_area: Closed-form measure of the whole family on the torus
        disjoint: Whether the rectangles are meant to be pairwise disjoint
        description: One-line definition for dumps
    """

    name: str
    rects: tuple[Rect, ...]
    labels: tuple[tuple[int, ...], ...]
    period: Fraction
    expected_area: Fraction
    disjoint: bool = True
    description: str = ""

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.rects):
            raise ConstructionError(f"{self.name}: {len(self.rects)} rectangles but {len(self.labels)} labels")
        if self.period <= 0 or (1 / self.period).denominator != 1:
            raise ConstructionError(f"{self.name}: period must be 1/k, got {self.period}")
        for r in self.rects:
            if r.x0 < 0 or r.x1 > self.period or r.y0 < 0 or r.y1 > 1:
                raise ConstructionError(f"{self.name}: rectangle {r.to_json()} leaves the template column")
        object.__setattr__(self, "_locator", RectLocator(self.rects))

    @property
    def copies(self) -> int:
        return int(1 / self.period)

    @property
    def template_area(self) -> Fraction:
        return sum((Fraction(r.area) for r in self.rects), Fraction(0))

    @property
    def total_area(self) -> Fraction:
        return self.template_area * self.copies

    @property
    def area_defect(self) -> Fraction:
        return self.total_area - self.expected_area

    def overlap_area(self) -> Fraction:
        """Summed pairwise overlap of the template rectangles (0 for a disjoint family)."""
        total = Fraction(0)
        for i, a in enumerate(self.rects):
            for b in self.rects[i + 1 :]:
                total += Fraction(a.overlap_area(b))
        return total

    def _local(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = float(self.period)
        col = np.clip(np.floor(xs / p), 0, self.copies - 1).astype(np.int64)
        return col, xs - col * p

    def locate(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Global index column * len(rects) + template index, or -1 outside the family."""
        col, local = self._local(np.asarray(xs, dtype=float))
        idx = self._locator.locate_strict(local, np.asarray(ys, dtype=float))  # type: ignore[attr-defined]
        return np.where(idx >= 0, col * len(self.rects) + idx, -1)

    def contains_arrays(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return self.locate(xs, ys) >= 0

    def split_index(self, index: int) -> tuple[int, tuple[int, ...]]:
        """(column, label) of a global index returned by ``locate``."""
        col, i = divmod(int(index), len(self.rects))
        return col, self.labels[i]

    def rects_on_torus(self) -> Iterator[tuple[int, tuple[int, ...], Rect]]:
        for col in range(self.copies):
            dx = self.period * col
            for label, r in zip(self.labels, self.rects):
                yield col, label, r.shifted(dx)

    def to_rows(self) -> List[List[str]]:
        return [
            [self.name, format_rational(self.period), ":".join(str(v) for v in label), *r.to_json()]
            for label, r in zip(self.labels, self.rects)
        ]

    def summary(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "rectangles": len(self.rects) * self.copies,
            "area": format_rational(self.total_area),
            "expected_area": format_rational(self.expected_area),
            "area_defect": format_rational(self.area_defect),
            "overlap": format_rational(self.overlap_area()),
            "disjoint": self.disjoint,
        }


REGION_ROW_HEADER = ["family", "period", "label", "x0", "x1", "y0", "y1"]


@dataclass(frozen=True)
class PreimageRegion:
    """through^-1(base minus exclude): membership is decided after applying ``through``."""

    name: str
    base: RegionFamily
    through: TorusMap
    exclude: Optional[RegionFamily] = None

    def locate(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Global index of the base cell holding the image, or -1."""
        u, v = self.through.apply(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
        idx = self.base.locate(u, v)
        if self.exclude is not None:
            idx = np.where(self.exclude.contains_arrays(u, v), -1, idx)
        return idx

    def contains_arrays(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return self.locate(xs, ys) >= 0


@dataclass(frozen=True)
class RegionCatalog:
    families: Dict[str, RegionFamily]
    preimages: Dict[str, PreimageRegion] = field(default_factory=dict)
    advisories: tuple[str, ...] = field(default_factory=tuple)

    def __getitem__(self, name: str) -> RegionFamily:
        try:
            return self.families[name]
        except KeyError:
            raise ParameterError(f"unknown region family {name!r}") from None

    def preimage(self, name: str) -> PreimageRegion:
        try:
            return self.preimages[name]
        except KeyError:
            raise ParameterError(f"unknown preimage region {name!r}") from None

    def names(self) -> List[str]:
        return list(self.families)

    def to_rows(self) -> List[List[str]]:
        return [row for fam in self.families.values() for row in fam.to_rows()]

    def summaries(self) -> List[Dict[str, Any]]:
        return [fam.summary() for fam in self.families.values()]


def _family(
    name: str,
    period: Fraction,
    expected: Fraction,
    cells: Sequence[tuple[tuple[int, ...], Rect]],
    description: str = "",
) -> RegionFamily:
    return RegionFamily(
        name,
        tuple(r for _, r in cells),
        tuple(label for label, _ in cells),
        period,
        expected,
        description=description,
    )


def _circle_union(intervals: Sequence[tuple[Fraction, Fraction]]) -> List[tuple[Fraction, Fraction]]:
    """Union of arcs [a, b) of the circle as disjoint intervals inside [0, 1)."""
    pieces: List[tuple[Fraction, Fraction]] = []
    for a, b in intervals:
        if b - a >= 1:
            return [(Fraction(0), Fraction(1))]
        a0 = rat_mod1(a)
        b0 = a0 + (b - a)
        if b0 > 1:
            pieces.extend([(a0, Fraction(1)), (Fraction(0), b0 - 1)])
        else:
            pieces.append((a0, b0))
    pieces.sort()
    merged: List[tuple[Fraction, Fraction]] = []
    for a, b in pieces:
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        elif b > a:
            merged.append((a, b))
    return merged


def _complement(parts: Sequence[tuple[Fraction, Fraction]], lo: Fraction, hi: Fraction) -> List[tuple[Fraction, Fraction]]:
    out = []
    cursor = lo
    for a, b in parts:
        if a > cursor:
            out.append((cursor, a))
        cursor = max(cursor, b)
    if cursor < hi:
        out.append((cursor, hi))
    return out


def _cross_family(
    name: str,
    period: Fraction,
    x_bands: Sequence[tuple[Fraction, Fraction]],
    y_bands: Sequence[tuple[Fraction, Fraction]],
    description: str,
) -> RegionFamily:
    """Union of full-height x-bands and full-width y-bands, cut into disjoint pieces.

    Bands are given as fractions of the column (x) and of the circle (y).
    The complement is a product set, so the expected area is
    1 - (1 - X)(1 - Y) with X and Y the band measures.
    """
    xs = _circle_union(x_bands)
    ys = _circle_union(y_bands)
    cells: List[tuple[tuple[int, ...], Rect]] = []
    for i, (a, b) in enumerate(xs):
        cells.append(((0, i), Rect(a * period, b * period, Fraction(0), Fraction(1))))
    for i, (c, d) in enumerate(ys):
        for a, b in _complement(xs, Fraction(0), Fraction(1)):
            cells.append(((1, i), Rect(a * period, b * period, c, d)))
    x_measure = sum((b - a for a, b in xs), Fraction(0))
    y_measure = sum((d - c for c, d in ys), Fraction(0))
    expected = 1 - (1 - x_measure) * (1 - y_measure)
    return _family(name, period, expected, cells, description)


def _frame(eps: Fraction) -> List[Rect]:
    """[eps, 1-eps]^2 minus [2 eps, 1-2 eps]^2, in unit-square coordinates."""
    return [
        Rect(eps, 1 - eps, eps, 2 * eps),
        Rect(eps, 1 - eps, 1 - 2 * eps, 1 - eps),
        Rect(eps, 2 * eps, 2 * eps, 1 - 2 * eps),
        Rect(1 - 2 * eps, 1 - eps, 2 * eps, 1 - 2 * eps),
    ]


def _scaled(r: Rect, w: Fraction) -> Rect:
    return Rect(r.x0 * w, r.x1 * w, r.y0, r.y1)


def variant_a_catalog(n: int, q_n: int, r: int, s_n: int, l_n: int) -> RegionCatalog:
    """Regions of the minimal / weak mixing construction at stage n.

    Families whose defining inequalities fail at these parameters (the
    minimality zones need eps2 > 4 eps4) are left out with an advisory.
    """
    if s_n < 1 or l_n < 1:
        raise ParameterError(f"region grids need s_n, l_n >= 1, got s_n={s_n}, l_n={l_n}")
    eps1, eps2, eps3, eps4 = stage_epsilons(n, q_n, r)
    w = Fraction(1, q_n)
    one = Fraction(1)
    zero = Fraction(0)
    fams: Dict[str, RegionFamily] = {}
    advisories: List[str] = []

    def add(fam: RegionFamily) -> None:
        fams[fam.name] = fam

    bands = [((t,), (Fraction(t, r), Fraction(t + 1, r))) for t in range(r)]
    add(_family("N", one, one, [(lab, Rect(zero, one, y0, y1)) for lab, (y0, y1) in bands], "T x [t/r, (t+1)/r)"))
    add(_family("D", w, one, [(lab, Rect(zero, w, y0, y1)) for lab, (y0, y1) in bands], "[0, 1/q) x [t/r, (t+1)/r)"))
    add(_family("D_half1", w, one / 2, [(lab, Rect(zero, w / 2, y0, y1)) for lab, (y0, y1) in bands], "left halves"))
    add(_family("D_half2", w, one / 2, [(lab, Rect(w / 2, w, y0, y1)) for lab, (y0, y1) in bands], "right halves"))
    shift_cells = []
    for (t,), (y0, y1) in bands:
        shift_cells.append(((t, 1), Rect(zero, w / 2, y0, y1)))
        shift_cells.append(((t, 2), Rect(w / 2, w, y0, y1)))
    add(_family("D_shift", w, one, shift_cells, "D_{n,j}^{t,i}, translated by j/q"))

    strip = (1 - 4 * eps2) * (eps3 - 2 * eps2)
    add(_family("B", w, strip, [((0,), Rect(2 * eps2 * w, (1 - 2 * eps2) * w, 2 * eps2, eps3))], "generic zone"))
    add(
        _family(
            "Y",
            w,
            strip,
            [((0,), Rect(2 * eps2 * w, eps3 * w, 2 * eps2, 1 - 2 * eps2))],
            "image of B under the double rotation",
        )
    )
    add(
        _family(
            "Y_literal",
            w,
            strip,
            [((0,), Rect((1 - eps3) * w, (1 - 2 * eps2) * w, 2 * eps2, 1 - 2 * eps2))],
            "right-hand strip [(1-eps3)/q, (1-2eps2)/q)",
        )
    )
    corners = [
        ((a, b), Rect(x0, x1, y0, y1))
        for a, (x0, x1) in enumerate([(zero, eps2 * w), ((1 - eps2) * w, w)])
        for b, (y0, y1) in enumerate([(zero, eps2), (1 - eps2, one)])
    ]
    add(_family("SIGMA1", w, 4 * eps2 * eps2, corners, "corner squares fixed by the double rotation"))
    add(
        _family(
            "SIGMA2",
            w,
            (1 - 4 * eps3) ** 2,
            [((0,), Rect(2 * eps3 * w, (1 - 2 * eps3) * w, 2 * eps3, 1 - 2 * eps3))],
            "central square fixed by the double rotation",
        )
    )
    frames = [((k, i), _scaled(rect, w)) for k, e in enumerate((eps2, eps3)) for i, rect in enumerate(_frame(e))]
    frame_area = sum(((1 - 2 * e) ** 2 - (1 - 4 * e) ** 2 for e in (eps2, eps3)), Fraction(0))
    add(_family("E_G", w, frame_area, frames, "smoothing frames of the double rotation"))
    add(_family("R", w, eps2, [((0,), Rect(zero, eps2 * w, zero, one))], "[0, eps2/q) x T"))

    if eps4 < Fraction(1, 4):
        # minimality zones live in the chart ((q/eps2) x, y) of the thin strip R
        rw = eps2 * w
        e_m = [((0, i), _scaled(rect, rw)) for i, rect in enumerate(_frame(eps4))]
        add(_family("E_M", w, eps2 * ((1 - 2 * eps4) ** 2 - (1 - 4 * eps4) ** 2), e_m, "smoothing frame in R"))
        step = (1 - 4 * eps4) / l_n
        a_min = [
            ((k,), Rect((2 * eps4 + k * step) * rw, (2 * eps4 + (k + 1) * step) * rw, 2 * eps4, 1 - 2 * eps4))
            for k in range(l_n)
        ]
        # the quarter turn sends slice k to row l_n - 1 - k
        b_min = [
            ((k,), Rect(2 * eps4 * rw, (1 - 2 * eps4) * rw, 2 * eps4 + k * step, 2 * eps4 + (k + 1) * step))
            for k in range(l_n)
        ]
        slab = eps2 * (1 - 4 * eps4) ** 2
        add(_family("A_MIN", w, slab, a_min, "vertical slices of R"))
        add(_family("B_MIN", w, slab, b_min, "horizontal slices of R"))
    else:
        advisories.append(f"stage {n}: eps4={eps4} >= 1/4; minimality zones E_M, A_MIN, B_MIN are empty")

    g_step = (1 - 4 * eps2) / s_n
    g_gen = [((j,), Rect((2 * eps2 + j * g_step) * w, (2 * eps2 + (j + 1) * g_step) * w, 2 * eps2, eps3)) for j in range(s_n)]
    # the double rotation reverses the order: G_j lands on Y_{s-1-j}
    y_gen = [
        ((j,), Rect(2 * eps2 * w, eps3 * w, 2 * eps2 + j * g_step, 2 * eps2 + (j + 1) * g_step)) for j in range(s_n)
    ]
    add(_family("G_GEN", w, strip, g_gen, "B split into s_n columns"))
    add(_family("Y_GEN", w, strip, y_gen, "Y split into s_n rows"))
    add(
        _family(
            "DELTA",
            w,
            one,
            [((j,), Rect(zero, w, Fraction(j, s_n), Fraction(j + 1, s_n))) for j in range(s_n)],
            "[i/q, (i+1)/q) x [j/s, (j+1)/s)",
        )
    )
    add(
        _cross_family(
            "E_W",
            w,
            [(-2 * eps1, 2 * eps1), (one / 2 - 2 * eps1, one / 2 + 2 * eps1)],
            [(Fraction(t, r) - 2 * eps1, Fraction(t, r) + 2 * eps1) for t in range(r)],
            "error zone of the weak mixing rotations",
        )
    )
    return RegionCatalog(fams, {}, tuple(advisories))


def exchange_catalog(
    stage: CantorStage,
    exchange: RectExchange,
    eps_prime: Fraction,
    p_map: TorusMap,
) -> RegionCatalog:
    """Regions of the Cantor-set constructions at stage n.

    Args:
        stage: Cantor stage of depth n
        exchange: The stage's rectangle exchange
        eps_prime: Half-width of the excluded margins is eps_prime / 2
        p_map: The vertical shear P_n; trapping zones are its preimages

    Raises:
        ConstructionError: If the margins around two kept endpoints overlap
    """
    q_n, s_n = exchange.q_n, exchange.s_n
    w = Fraction(1, q_n)
    sub = w / s_n
    kept = stage.exact_kept()
    kept_total = stage.kept_total_at(stage.depth)
    fams: Dict[str, RegionFamily] = {}

    gen = [((c, l), Rect(c * sub, (c + 1) * sub, iv.lo, iv.hi)) for c in range(s_n) for l, iv in enumerate(kept)]
    fams["GEN_CELLS"] = _family("GEN_CELLS", w, kept_total, gen, "[i1/(sq), (i1+1)/(sq)) x I_l")
    nongen = [
        ((c, k, g), Rect(c * sub, (c + 1) * sub, piece.lo, piece.hi))
        for c in range(s_n)
        for k, level in enumerate(stage.gap_pieces(), start=1)
        for g, piece in enumerate(level)
    ]
    fams["NONGEN_CELLS"] = _family("NONGEN_CELLS", w, 1 - kept_total, nongen, "[i1/(sq), (i1+1)/(sq)) x J")
    v_cells = [((p.image.j2, p.image.j3), p.target) for p in exchange.template if p.cell.family == "I"]
    w_cells = [((p.image.j2, p.image.j3), p.target) for p in exchange.template if p.cell.family == "J"]
    fams["V_CELLS"] = _family("V_CELLS", w, kept_total, v_cells, "images of the generic cells")
    fams["W_CELLS"] = _family("W_CELLS", w, 1 - kept_total, w_cells, "images of the non-generic cells")

    half = Fraction(eps_prime) / 2
    endpoints = sorted({Fraction(iv.lo) % 1 for iv in kept} | {Fraction(iv.hi) % 1 for iv in kept})
    spacing = [b - a for a, b in zip(endpoints, endpoints[1:] + [endpoints[0] + 1])]
    if min(spacing) <= 2 * half:
        raise ConstructionError(f"margin {eps_prime} is wider than the gap between two kept endpoints")
    e_n = _cross_family(
        "E_N",
        w,
        [(Fraction(c, s_n) - half / w, Fraction(c, s_n) + half / w) for c in range(s_n)],
        [(e - half, e + half) for e in endpoints],
        "margins around the sub-column edges and the kept endpoints",
    )
    fams["E_N"] = e_n
    preimages = {
        "X_TRAP": PreimageRegion("X_TRAP", fams["GEN_CELLS"], p_map, e_n),
        "Y_TRAP": PreimageRegion("Y_TRAP", fams["NONGEN_CELLS"], p_map, e_n),
    }
    return RegionCatalog(fams, preimages, exchange.advisories)
