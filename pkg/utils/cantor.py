"""Cantor sets on [0, 1]: the middle-third set and gap-sequence sets C_lambda.

A gap-sequence set removes, at level k, one open gap of length
lambda_{2^(k-1)+l} from each kept interval I_l^(k-1). The gap position is
forced: each remaining piece must be exactly as long as the gaps that will
later be removed from it.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.special import zeta

from .errors import ParameterError
from .numerics import Closure, Interval, Real

# Levels summed explicitly before the geometric tail takes over
_EXPLICIT_LEVELS = 48
# Blocks up to this many terms are summed directly instead of via Hurwitz zeta differences
_DIRECT_BLOCK = 1024


class CantorKind(Enum):
    """Construction family of a Cantor set."""

    MIDDLE_THIRD = "middle-third"
    GAP_SEQUENCE = "gap-sequence"


@dataclass(frozen=True)
class CantorSpec:
    """Description of a Cantor set: middle-third, a p-series, or an explicit gap list."""

    kind: CantorKind
    p: Optional[float] = None
    gaps: Optional[tuple[float, ...]] = None
    c0: float = 1.0

    @classmethod
    def middle_third(cls) -> "CantorSpec":
        return cls(CantorKind.MIDDLE_THIRD)

    @classmethod
    def p_series(cls, p: float) -> "CantorSpec":
        """Gaps lambda_k = k^-p / c0 with c0 = zeta(p).

        Raises:
            ParameterError: If p <= 1 (the gap sequence is not summable)
        """
        if p <= 1:
            raise ParameterError(f"gap sequence k^-p is not summable for p={p}")
        return cls(CantorKind.GAP_SEQUENCE, p=float(p), c0=float(zeta(p, 1)))

    @classmethod
    def from_alpha(cls, alpha: float) -> "CantorSpec":
        """p-series with p = 1/(alpha - 1), for 1 < alpha < 2."""
        if not 1 < alpha < 2:
            raise ParameterError("alpha out of (1, 2)")
        return cls.p_series(1.0 / (alpha - 1.0))

    @classmethod
    def explicit(cls, gaps: List[float]) -> "CantorSpec":
        """Finite explicit gap list, normalized to total length 1."""
        if not gaps or any(g <= 0 for g in gaps):
            raise ParameterError("explicit gap lengths must be positive")
        total = float(sum(gaps))
        return cls(CantorKind.GAP_SEQUENCE, gaps=tuple(g / total for g in gaps), c0=total)

    @property
    def dimension(self) -> float:
        """Limit dimension: log2/log3, 1/p, or 0 for a finite gap list."""
        if self.kind is CantorKind.MIDDLE_THIRD:
            return math.log(2) / math.log(3)
        if self.p is not None:
            return 1.0 / self.p
        return 0.0

    def gap_length(self, index: int) -> Real:
        """lambda_index (1-based, in construction order)."""
        if index < 1:
            raise ParameterError("gap indices start at 1")
        if self.kind is CantorKind.MIDDLE_THIRD:
            level = index.bit_length()
            return Fraction(1, 3**level)
        if self.gaps is not None:
            return self.gaps[index - 1] if index <= len(self.gaps) else 0.0
        return float(index) ** (-self.p) / self.c0  # type: ignore[operator]

    def _level_blocks(self, level: int, k: int) -> np.ndarray:
        """Per kept interval of ``level``: summed lengths of its descendant gaps at level k."""
        count = 2**level
        width = 2 ** (k - 1 - level)
        start = 2 ** (k - 1)
        if self.gaps is not None:
            lam = np.zeros(count * width)
            chunk = np.asarray(self.gaps[start - 1 : start - 1 + count * width])
            lam[: len(chunk)] = chunk
            return lam.reshape(count, width).sum(axis=1)
        p = float(self.p)  # type: ignore[arg-type]
        if width <= _DIRECT_BLOCK:
            lam = np.arange(start, start + count * width, dtype=float) ** (-p) / self.c0
            return lam.reshape(count, width).sum(axis=1)
        starts = start + np.arange(count, dtype=float) * width
        return (zeta(p, starts) - zeta(p, starts + width)) / self.c0

    def descendant_sums(self, level: int) -> List[Real]:
        """Descendant-gap totals for every kept interval I_m^level, m = 0..2^level-1.

        These equal the kept lengths: each kept interval is exactly filled by
        the gaps later removed from it.
        """
        count = 2**level
        if self.kind is CantorKind.MIDDLE_THIRD:
            return [Fraction(1, 3**level)] * count
        totals = np.zeros(count)
        if self.gaps is not None:
            k = level + 1
            while 2 ** (k - 1) <= len(self.gaps):
                totals += self._level_blocks(level, k)
                k += 1
            return [float(v) for v in totals]
        last = totals
        for k in range(level + 1, level + 1 + _EXPLICIT_LEVELS):
            last = self._level_blocks(level, k)
            totals = totals + last
        # far levels shrink geometrically by 2^(1-p)
        ratio = 2.0 ** (1.0 - float(self.p))  # type: ignore[arg-type]
        totals = totals + last * ratio / (1.0 - ratio)
        return [float(v) for v in totals]

    def descendant_sum(self, level: int, index: int) -> Real:
        """Total length of every gap removed inside the kept interval I_index^level."""
        return self.descendant_sums(level)[index]

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind.value}
        if self.p is not None:
            data["p"] = self.p
            data["c0"] = self.c0
        if self.gaps is not None:
            data["gaps"] = list(self.gaps)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CantorSpec":
        kind = CantorKind(data["kind"])
        if kind is CantorKind.MIDDLE_THIRD:
            return cls.middle_third()
        if "gaps" in data:
            return cls(kind, gaps=tuple(float(g) for g in data["gaps"]), c0=float(data.get("c0", 1.0)))
        return cls.p_series(float(data["p"]))


@dataclass(frozen=True)
class CantorStage:
    """Depth-n approximation: 2^n kept intervals and the gaps removed at levels 1..n."""

    spec: CantorSpec
    depth: int
    kept: tuple[Interval, ...]
    gaps: tuple[tuple[Interval, ...], ...] = field(default_factory=tuple)

    @property
    def total_kept(self) -> Real:
        return sum((iv.length for iv in self.kept), Fraction(0) if self.exact else 0.0)

    @property
    def total_gap(self) -> Real:
        zero: Real = Fraction(0) if self.exact else 0.0
        return sum((iv.length for level in self.gaps for iv in level), zero)

    @property
    def exact(self) -> bool:
        return self.spec.kind is CantorKind.MIDDLE_THIRD

    def gaps_at(self, k: int) -> tuple[Interval, ...]:
        """Gaps J_l^k removed at level k (1-based)."""
        return self.gaps[k - 1]

    def kept_total_at(self, k: int) -> Fraction:
        """Exact total kept length after k removal levels (k = 0 gives 1)."""
        removed = sum(
            (_exact(iv.hi) - _exact(iv.lo) for level in self.gaps[:k] for iv in level),
            Fraction(0),
        )
        return 1 - removed

    def gap_pieces(self) -> List[List[Interval]]:
        """Per-level gap pieces: the two halves of J^1 at level 1, the J_l^k after that."""
        levels: List[List[Interval]] = []
        for k in range(1, self.depth + 1):
            if k == 1:
                gap = self.gaps[0][0]
                mid = (_exact(gap.lo) + _exact(gap.hi)) / 2
                levels.append(
                    [
                        Interval(_exact(gap.lo), mid, Closure.HALF_OPEN),
                        Interval(mid, _exact(gap.hi), Closure.HALF_OPEN),
                    ]
                )
            else:
                levels.append([Interval(_exact(g.lo), _exact(g.hi), Closure.HALF_OPEN) for g in self.gaps[k - 1]])
        return levels

    def exact_kept(self) -> List[Interval]:
        """Kept intervals with Fraction endpoints (exact binary values for float stages)."""
        return [Interval(_exact(iv.lo), _exact(iv.hi), Closure.HALF_OPEN) for iv in self.kept]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "spec": self.spec.to_dict(),
            "depth": self.depth,
            "kept": [iv.to_json() for iv in self.kept],
            "gaps": [[iv.to_json() for iv in level] for level in self.gaps],
        }


def _exact(v: Real) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(float(v))


def cantor_stage(spec: CantorSpec, n: int) -> CantorStage:
    """Enumerate kept intervals and gaps down to depth n.

    Raises:
        ParameterError: If n < 1 or the gap sequence is not summable
    """
    if n < 1:
        raise ParameterError(f"cantor depth must be >= 1, got {n}")
    if spec.kind is CantorKind.GAP_SEQUENCE and spec.p is not None and spec.p <= 1:
        raise ParameterError(f"gap sequence k^-p is not summable for p={spec.p}")
    if spec.kind is CantorKind.MIDDLE_THIRD:
        return _middle_third_stage(spec, n)
    return _gap_sequence_stage(spec, n)


def _middle_third_stage(spec: CantorSpec, n: int) -> CantorStage:
    lefts = [Fraction(0)]
    gaps: List[tuple[Interval, ...]] = []
    for k in range(1, n + 1):
        third = Fraction(1, 3**k)
        gaps.append(tuple(Interval(x + third, x + 2 * third, Closure.OPEN) for x in lefts))
        lefts = [y for x in lefts for y in (x, x + 2 * third)]
    size = Fraction(1, 3**n)
    kept = tuple(Interval(x, x + size, Closure.CLOSED) for x in lefts)
    return CantorStage(spec, n, kept, tuple(gaps))


def _gap_sequence_stage(spec: CantorSpec, n: int) -> CantorStage:
    bounds: List[tuple[float, float]] = [(0.0, 1.0)]
    gaps: List[tuple[Interval, ...]] = []
    for k in range(1, n + 1):
        level_gaps = []
        children: List[tuple[float, float]] = []
        filled = spec.descendant_sums(k)
        for l, (lo, hi) in enumerate(bounds):
            left_len = float(filled[2 * l])
            gap_lo = lo + left_len
            gap_hi = gap_lo + float(spec.gap_length(2 ** (k - 1) + l))
            level_gaps.append(Interval(gap_lo, gap_hi, Closure.OPEN))
            children.extend([(lo, gap_lo), (gap_hi, hi)])
        gaps.append(tuple(level_gaps))
        bounds = children
    kept = tuple(Interval(lo, hi, Closure.CLOSED) for lo, hi in bounds)
    return CantorStage(spec, n, kept, tuple(gaps))


class Membership(Enum):
    """Outcome of a depth-limited Cantor membership query."""

    IN = "in"
    OUT = "out"
    UNDECIDED = "undecided-at-depth"


@dataclass(frozen=True)
class MembershipResult:
    status: Membership
    interval: Optional[Interval] = None


def cantor_membership(x: Real, spec: CantorSpec, depth: int) -> MembershipResult:
    """Decide x in C up to the given depth.

    Returns OUT if x lies in a removed gap, IN if x is an endpoint of a kept
    interval (endpoints are never removed), otherwise UNDECIDED together with
    the depth-n kept interval containing x.
    """
    if not 0 <= x <= 1:
        raise ParameterError(f"membership needs x in [0, 1], got {x}")
    stage = cantor_stage(spec, depth)
    value = _exact(x) if stage.exact else float(x)
    for level in stage.gaps:
        for gap in level:
            if gap.lo < value < gap.hi:
                return MembershipResult(Membership.OUT, gap)
    for kept in stage.kept:
        if kept.lo <= value <= kept.hi:
            if value in (kept.lo, kept.hi):
                return MembershipResult(Membership.IN, kept)
            return MembershipResult(Membership.UNDECIDED, kept)
    return MembershipResult(Membership.OUT)
