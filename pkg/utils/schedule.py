"""Rational rotation schedule alpha_n = p_n / q_n and its growth flags.

Stage n+1 is derived from stage n by

    p_{n+1} = k_n l_n q_n p_n + 1,    q_{n+1} = k_n l_n q_n^2

in exact integer arithmetic, so every alpha_n is in lowest terms.
"""

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

from .errors import ConstructionError, ParameterError


@dataclass(frozen=True)
class GrowthFlags:
    """Growth conditions checked when stage n+1 is appended.

    Attributes:
        mixing: q_{n+1} > 10 n^2 q_n, needed by the mixing sequence
        minimality: q_{n+1} > l_n q_n^2, needed for full cell coverage
        norm_proxy: ||DH_{n-1}||_0 < ln q_n, once a norm estimate is attached
    """

    mixing: bool
    minimality: bool
    mixing_margin: int
    minimality_margin: int
    norm_proxy: Optional[bool] = None
    norm_estimate: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mixing": self.mixing,
            "minimality": self.minimality,
            "mixing_margin": self.mixing_margin,
            "minimality_margin": self.minimality_margin,
            "norm_proxy": self.norm_proxy,
            "norm_estimate": self.norm_estimate,
        }


@dataclass(frozen=True)
class ScheduleRow:
    """Stage n of the schedule.

    The multipliers k, l, s and the flags belong to the step n -> n+1 and
    stay unset on the last row.
    """

    n: int
    p: int
    q: int
    k: Optional[int] = None
    l: Optional[int] = None
    s: Optional[int] = None
    flags: Optional[GrowthFlags] = None

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.p, self.q)


ROW_HEADER = [
    "n",
    "p",
    "q",
    "alpha",
    "k",
    "l",
    "s",
    "mixing_growth",
    "minimality_growth",
    "norm_proxy",
]


def _flag(value: Optional[bool]) -> str:
    return "" if value is None else str(value).lower()


@dataclass(frozen=True)
class RotationSchedule:
    """Exact rational rotation numbers for stages 1..n_max."""

    rows: tuple[ScheduleRow, ...]

    @classmethod
    def initial(cls, q1: int, p1: int = 1) -> "RotationSchedule":
        """Schedule holding only stage 1.

        Raises:
            ParameterError: If q1 < 1 or gcd(p1, q1) != 1
        """
        if q1 < 1:
            raise ParameterError(f"q_1 must be positive, got {q1}")
        if math.gcd(p1, q1) != 1:
            raise ParameterError(f"p_1/q_1 = {p1}/{q1} is not in lowest terms")
        return cls((ScheduleRow(1, p1, q1),))

    @classmethod
    def from_multipliers(
        cls,
        q1: int,
        multipliers: Sequence[Sequence[int]],
        p1: int = 1,
    ) -> "RotationSchedule":
        """Build stages 1..len(multipliers)+1 from (k_n, l_n, s_n) triples."""
        schedule = cls.initial(q1, p1)
        for triple in multipliers:
            if len(triple) != 3:
                raise ParameterError(f"expected (k, l, s) per stage, got {list(triple)}")
            k, l, s = (int(v) for v in triple)
            schedule = extend_schedule(schedule, k, l, s)
        return schedule

    @property
    def n_max(self) -> int:
        return self.rows[-1].n

    def stage(self, n: int) -> ScheduleRow:
        """Row of stage n.

        Raises:
            ParameterError: If the schedule does not reach stage n
        """
        if not 1 <= n <= self.n_max:
            raise ParameterError(f"schedule has stages 1..{self.n_max}, stage {n} requested")
        return self.rows[n - 1]

    def alpha(self, n: int) -> Fraction:
        return self.stage(n).alpha

    def extend(self, k_n: int, l_n: int, s_n: int) -> "RotationSchedule":
        return extend_schedule(self, k_n, l_n, s_n)

    def with_norm_estimate(self, n: int, norm: float) -> "RotationSchedule":
        """Attach a ||DH_{n-1}||_0 estimate to the step n -> n+1."""
        row = self.stage(n)
        if row.flags is None:
            raise ParameterError(f"stage {n} has no successor to attach a norm estimate to")
        flags = replace(row.flags, norm_proxy=norm < math.log(row.q), norm_estimate=norm)
        rows = list(self.rows)
        rows[n - 1] = replace(row, flags=flags)
        return RotationSchedule(tuple(rows))

    def to_rows(self) -> List[List[str]]:
        """CSV rows under ROW_HEADER; alpha is written as "p/q"."""
        out = []
        for r in self.rows:
            out.append(
                [
                    str(r.n),
                    str(r.p),
                    str(r.q),
                    f"{r.p}/{r.q}",
                    "" if r.k is None else str(r.k),
                    "" if r.l is None else str(r.l),
                    "" if r.s is None else str(r.s),
                    _flag(r.flags.mixing if r.flags else None),
                    _flag(r.flags.minimality if r.flags else None),
                    _flag(r.flags.norm_proxy if r.flags else None),
                ]
            )
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stages": [
                {
                    "n": r.n,
                    "p": r.p,
                    "q": r.q,
                    "k": r.k,
                    "l": r.l,
                    "s": r.s,
                    "flags": r.flags.to_dict() if r.flags else None,
                }
                for r in self.rows
            ]
        }


def extend_schedule(s: RotationSchedule, k_n: int, l_n: int, s_n: int) -> RotationSchedule:
    """Append stage n+1 to the schedule.

    Args:
        s: Schedule ending at stage n
        k_n: First multiplier
        l_n: Second multiplier (also the minimality grid height)
        s_n: Grid refinement of stage n

    Returns:
        New schedule with the step n -> n+1 recorded on row n

    Raises:
        ParameterError: If a multiplier or s_n is below 1
        ConstructionError: If the new pair is not coprime
    """
    if k_n < 1 or l_n < 1:
        raise ParameterError(f"multipliers must be >= 1, got k={k_n}, l={l_n}")
    if s_n < 1:
        raise ParameterError(f"grid refinement s_n must be >= 1, got {s_n}")
    last = s.rows[-1]
    n, p, q = last.n, last.p, last.q
    step = k_n * l_n * q
    p_next = step * p + 1
    q_next = step * q
    if math.gcd(p_next, q_next) != 1:
        raise ConstructionError(f"p_{n + 1}/q_{n + 1} = {p_next}/{q_next} is not in lowest terms")
    flags = GrowthFlags(
        mixing=q_next > 10 * n**2 * q,
        minimality=q_next > l_n * q**2,
        mixing_margin=q_next - 10 * n**2 * q,
        minimality_margin=q_next - l_n * q**2,
    )
    rows = list(s.rows[:-1])
    rows.append(replace(last, k=k_n, l=l_n, s=s_n, flags=flags))
    rows.append(ScheduleRow(n + 1, p_next, q_next))
    return RotationSchedule(tuple(rows))
