"""Stage assembly: conjugacies h_n, H_n = h_1 o ... o h_n and T_n = H_n o S_{alpha_{n+1}} o H_n^-1.

A stage bundle carries everything a verification routine needs at stage n:
the schedule rows of n and n+1, the stage epsilons, the conjugacy and its
cumulative product, the region catalog and, for the Cantor-set variants,
the rectangle exchange.
"""

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Sequence

import numpy as np

from .cantor import CantorSpec, cantor_stage
from .config import config
from .errors import ConstructionError, ParameterError
from .exchange import ExchangeMap, RectExchange, build_exchange
from .maps import (
    ComposedMap,
    IdentityMap,
    KappaProfile,
    TorusMap,
    Translation,
    assemble_phi,
    build_P,
    estimate_sup_norm,
    shear_coefficient,
    shear_g,
    shear_norm,
    stage_epsilons,
)
from .numerics import Interval, TorusPoint, format_rational, rat_mod1, wrap_unit
from .regions import RegionCatalog, exchange_catalog, variant_a_catalog
from .schedule import RotationSchedule, ScheduleRow

VARIANTS = ("A", "C", "D", "E")
# Largest d0-Lipschitz constant of the default test functions
LIPSCHITZ_BOUND = 4 * math.pi


@dataclass(frozen=True)
class StageParams:
    """Variant-level parameters shared by every stage of one experiment.

    Attributes:
        variant: "A", "C", "D" or "E"
        r: Number of horizontal bands of the weak mixing rotations (A)
        sigma: Shear exponent in (0, 1/2) of g_n (A)
        alpha: Target box dimension in (1, 2) of the gap-sequence Cantor set (D, E)
        smoothing: Corner blend half-width of the kappa tent (0 keeps it piecewise linear)
    """

    variant: str
    r: int = 1
    sigma: float = 0.25
    alpha: Optional[float] = None
    smoothing: float = 0.0

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown variant {self.variant!r}, expected one of {', '.join(VARIANTS)}")
        if self.r < 1:
            raise ParameterError(f"band count r must be >= 1, got {self.r}")
        if self.variant == "A" and not 0 < self.sigma < 0.5:
            raise ParameterError(f"sigma out of (0, 1/2): {self.sigma}")
        if self.variant in ("D", "E"):
            if self.alpha is None or not 1 < self.alpha < 2:
                raise ParameterError(f"alpha out of (1, 2): {self.alpha}")

    @property
    def cantor(self) -> Optional[CantorSpec]:
        if self.variant == "C":
            return CantorSpec.middle_third()
        if self.variant in ("D", "E"):
            return CantorSpec.from_alpha(float(self.alpha))  # type: ignore[arg-type]
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant,
            "r": self.r,
            "sigma": self.sigma,
            "alpha": self.alpha,
            "smoothing": self.smoothing,
        }


@dataclass(frozen=True)
class EpsilonSchedule:
    """Stage constants; unset entries do not apply to the variant."""

    eps1: Optional[Fraction] = None
    eps2: Optional[Fraction] = None
    eps3: Optional[Fraction] = None
    eps4: Optional[Fraction] = None
    delta: Optional[float] = None
    eps_prime: Optional[Fraction] = None

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {}
        for key in ("eps1", "eps2", "eps3", "eps4", "eps_prime"):
            value = getattr(self, key)
            out[key] = None if value is None else format_rational(value)
        out["delta"] = self.delta
        return out


def epsilon_schedule(params: StageParams, n: int, row: ScheduleRow) -> EpsilonSchedule:
    """Constants of stage n.

    Variant A uses eps1 = 1/(3nr), eps2 = eps1/8, eps3 = eps1/2,
    eps4 = 1/(2^n q_n). The Cantor variants use the tent height delta_n
    (e^-(3^n) for C, lambda_(2^(n+1)) for D and E) and the trapping margin
    eps' = e^-(3^n) / (2 (s_n q_n + 2^(n+1))), which keeps mu(E_n) below
    e^-(3^n).
    """
    if params.variant == "A":
        e1, e2, e3, e4 = stage_epsilons(n, row.q, params.r)
        return EpsilonSchedule(eps1=e1, eps2=e2, eps3=e3, eps4=e4)
    if row.s is None:
        raise ParameterError(f"stage {n} needs s_n")
    spec = params.cantor
    if params.variant == "C":
        delta = math.exp(-(3**n))
    else:
        delta = float(spec.gap_length(2 ** (n + 1)))  # type: ignore[union-attr]
    eps_prime = Fraction(math.exp(-(3**n))) / (2 * (row.s * row.q + 2 ** (n + 1)))
    return EpsilonSchedule(delta=delta, eps_prime=eps_prime)


@dataclass(frozen=True)
class ConjugatedRotation:
    """T = H o S_(p/q) o H^-1 with an exact rotation number."""

    H: TorusMap
    p: int
    q: int
    H_inv: Optional[TorusMap] = None

    def __post_init__(self) -> None:
        if self.q < 1:
            raise ParameterError(f"rotation denominator must be positive, got {self.q}")
        if self.H_inv is None:
            object.__setattr__(self, "H_inv", self.H.inverse())

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.p, self.q)


@dataclass(frozen=True)
class StageBundle:
    """Everything built for stage n of one variant.

    ``inner`` is the part of h_n that the intermediate-coordinate tests look
    through: phi_n o P_n for variant A, the whole h_n for the Cantor
    variants.
    """

    params: StageParams
    n: int
    row: ScheduleRow
    next_row: ScheduleRow
    eps: EpsilonSchedule
    kappa: KappaProfile
    h: TorusMap
    inner: TorusMap
    phi: Optional[TorusMap]
    P: TorusMap
    H: TorusMap
    H_inv: TorusMap
    H_prev: TorusMap
    catalog: RegionCatalog
    exchange: Optional[RectExchange] = None
    shear_coefficient: Optional[int] = None
    advisories: tuple[str, ...] = field(default_factory=tuple)

    @property
    def variant(self) -> str:
        return self.params.variant

    @property
    def q_n(self) -> int:
        return self.row.q

    @property
    def s_n(self) -> int:
        return int(self.row.s or 1)

    @property
    def l_n(self) -> int:
        return int(self.row.l or 1)

    @property
    def k_n(self) -> int:
        return int(self.row.k or 1)

    @property
    def q_next(self) -> int:
        return self.next_row.q

    @property
    def p_next(self) -> int:
        return self.next_row.p

    @property
    def system(self) -> ConjugatedRotation:
        return ConjugatedRotation(self.H, self.p_next, self.q_next, self.H_inv)

    def summary(self) -> Dict[str, Any]:
        return {
            "variant": self.variant,
            "n": self.n,
            "p_n": self.row.p,
            "q_n": self.q_n,
            "p_next": self.p_next,
            "q_next": self.q_next,
            "k_n": self.row.k,
            "l_n": self.row.l,
            "s_n": self.row.s,
            "eps": self.eps.to_dict(),
            "kappa": self.kappa.to_dict(),
            "shear_coefficient": self.shear_coefficient,
            "h": self.h.label,
            "advisories": list(self.advisories),
        }


def build_stage(
    params: StageParams,
    schedule: RotationSchedule,
    n: int,
    previous: Optional[StageBundle] = None,
) -> StageBundle:
    """Assemble stage n; H_n is built on top of ``previous`` (stage n-1) when given.

    Raises:
        ParameterError: If the schedule does not reach stage n+1 or
            ``previous`` is not stage n-1 of the same variant
    """
    if n < 1:
        raise ParameterError(f"stage index must be >= 1, got {n}")
    if schedule.n_max < n + 1:
        raise ParameterError(f"stage {n} needs alpha_{n + 1}; schedule ends at stage {schedule.n_max}")
    if previous is not None and (previous.n != n - 1 or previous.variant != params.variant):
        raise ParameterError(f"stage {n} cannot extend stage {previous.n} of variant {previous.variant}")
    if previous is None and n > 1:
        raise ParameterError(f"stage {n} needs stage {n - 1} to build H_n")
    row = schedule.stage(n)
    next_row = schedule.stage(n + 1)
    eps = epsilon_schedule(params, n, row)
    advisories: List[str] = []
    exchange: Optional[RectExchange] = None
    phi: Optional[TorusMap] = None
    coefficient: Optional[int] = None

    if params.variant == "A":
        r = params.r
        kappa = KappaProfile.for_minimality(n, row.q, eps.eps2, params.smoothing)  # type: ignore[arg-type]
        P = build_P(kappa, f"P_{n}")
        phi = assemble_phi(n, row.q, r)
        g = shear_g(n, row.q, params.sigma)
        coefficient = g.coefficient
        h: TorusMap = ComposedMap([g, phi, P], label=f"h_{n}")
        inner: TorusMap = ComposedMap([phi, P], label=f"phi_{n} o P_{n}")
        catalog = variant_a_catalog(n, row.q, r, int(row.s or row.q + 1), int(row.l or 1))
        if eps.eps1 >= Fraction(1, 4):  # type: ignore[operator]
            advisories.append(f"stage {n}: eps1={eps.eps1} >= 1/4; the weak mixing rotations are the identity")
    else:
        spec = params.cantor
        exchange = build_exchange(params.variant, n, row.q, int(row.s), spec)  # type: ignore[arg-type]
        kappa = KappaProfile.for_trapping(n, row.q, int(row.s), float(eps.delta), params.smoothing)  # type: ignore[arg-type]
        P = build_P(kappa, f"P_{n}")
        h = ComposedMap([ExchangeMap(exchange, label=f"pi_{n}"), P], label=f"h_{n}")
        inner = h
        catalog = exchange_catalog(cantor_stage(spec, n), exchange, eps.eps_prime, P)  # type: ignore[arg-type]
    advisories.extend(catalog.advisories)

    if previous is None:
        H_prev: TorusMap = IdentityMap("H_0")
        H: TorusMap = ComposedMap([h], label=f"H_{n}")
    else:
        H_prev = previous.H
        H = ComposedMap([previous.H, h], label=f"H_{n}")
    return StageBundle(
        params=params,
        n=n,
        row=row,
        next_row=next_row,
        eps=eps,
        kappa=kappa,
        h=h,
        inner=inner,
        phi=phi,
        P=P,
        H=H,
        H_inv=H.inverse(),
        H_prev=H_prev,
        catalog=catalog,
        exchange=exchange,
        shear_coefficient=coefficient,
        advisories=tuple(advisories),
    )


def build_stages(params: StageParams, schedule: RotationSchedule, n_max: Optional[int] = None) -> List[StageBundle]:
    """Stages 1..n_max (default: every stage the schedule has a successor for)."""
    last = schedule.n_max - 1 if n_max is None else n_max
    if last < 1:
        raise ParameterError("schedule needs at least two stages")
    stages: List[StageBundle] = []
    previous: Optional[StageBundle] = None
    for n in range(1, last + 1):
        previous = build_stage(params, schedule, n, previous)
        stages.append(previous)
    return stages


# ---------------------------------------------------------------------------
# Orbits
# ---------------------------------------------------------------------------


def _phases(q: int, p: int, indices: np.ndarray, start: int, stride: int) -> np.ndarray:
    """(start + i * stride) * p mod q as exact integers."""
    step = (stride * p) % q
    offset = (start * p) % q
    if q > 2**31:
        return np.array([(offset + int(i) * step) % q for i in indices], dtype=np.int64)
    return (offset + indices * step) % q


def base_orbit_chunks(
    system: ConjugatedRotation,
    base: TorusPoint,
    m: int,
    start: int = 0,
    stride: int = 1,
    chunk: Optional[int] = None,
) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield (i, x, y) chunks of S^(start + i*stride)(base) for i < m.

    The rotation phase is an exact integer mod q; it is converted to a
    float once per point, so no error accumulates along the orbit.
    """
    if m < 0:
        raise ParameterError(f"orbit length must be non-negative, got {m}")
    size = chunk or config.chunk_size
    bx, by = float(base.x), float(base.y)
    for lo in range(0, m, size):
        idx = np.arange(lo, min(lo + size, m), dtype=np.int64)
        phase = _phases(system.q, system.p, idx, start, stride)
        xs = wrap_unit(bx + phase / system.q)
        yield idx, xs, np.full(len(idx), by)


def orbit_chunks(
    system: ConjugatedRotation,
    x: TorusPoint,
    m: int,
    start: int = 0,
    stride: int = 1,
    chunk: Optional[int] = None,
) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield (i, x, y) chunks of T^(start + i*stride)(x), T = H o S o H^-1.

    Prints a warning when the window runs past one full period q.
    """
    if start + (m - 1) * stride >= system.q and m > 0:
        print(
            f"Warning: orbit window of {m} points (stride {stride}) exceeds the period {system.q}",
            file=sys.stderr,
        )
    base = system.H_inv.eval(x)  # type: ignore[union-attr]
    for idx, bx, by in base_orbit_chunks(system, base, m, start, stride, chunk):
        tx, ty = system.H.apply(bx, by)
        yield idx, tx, ty


def orbit(system: ConjugatedRotation, x: TorusPoint, m: int, start: int = 0, stride: int = 1) -> List[TorusPoint]:
    """The first m points of the orbit as a list."""
    points: List[TorusPoint] = []
    for _, xs, ys in orbit_chunks(system, x, m, start, stride):
        points.extend(TorusPoint(float(a), float(b)) for a, b in zip(xs, ys))
    return points


# ---------------------------------------------------------------------------
# Mixing sequence and decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixingSequence:
    """Least m with dist(m q_n alpha_(n+1) - 1/2, Z) <= q_n / q_(n+1), and its offset a."""

    m: int
    a: Fraction
    q_n: int
    q_next: int

    @property
    def within_bound(self) -> bool:
        return abs(self.a) <= Fraction(1, self.q_next)

    def to_dict(self) -> Dict[str, Any]:
        return {"m": self.m, "a": format_rational(self.a), "within_bound": self.within_bound}


def mixing_time(q_n: int, p_next: int, q_next: int) -> MixingSequence:
    """Search m in [1, q_(n+1)] with an exact integer test.

    With c = m q_n p_(n+1) mod q_(n+1), the distance condition reads
    |2c - q_(n+1)| <= 2 q_n.

    Raises:
        ConstructionError: If no m qualifies
    """
    if q_n < 1 or q_next < 1:
        raise ParameterError(f"mixing time needs positive denominators, got q_n={q_n}, q_next={q_next}")
    c0 = (q_n * p_next) % q_next
    block = 1 << 16
    found: Optional[int] = None
    for lo in range(1, q_next + 1, block):
        ms = np.arange(lo, min(lo + block, q_next + 1), dtype=np.int64)
        if q_next > 2**31:
            hits = [int(m) for m in ms if abs(2 * ((int(m) * c0) % q_next) - q_next) <= 2 * q_n]
            if hits:
                found = hits[0]
                break
            continue
        c = (ms * c0) % q_next
        ok = np.nonzero(np.abs(2 * c - q_next) <= 2 * q_n)[0]
        if len(ok):
            found = int(ms[ok[0]])
            break
    if found is None:
        raise ConstructionError(f"no mixing time m <= {q_next} for q_n={q_n}, alpha={p_next}/{q_next}")
    period = Fraction(1, q_n)
    a = rat_mod1(found * Fraction(p_next, q_next) - period / 2)
    a = a - math.floor(a / period) * period
    if a >= period / 2:
        a -= period
    return MixingSequence(found, a, q_n, q_next)


def mixing_sequence(stage: StageBundle) -> MixingSequence:
    return mixing_time(stage.q_n, stage.p_next, stage.q_next)


@dataclass(frozen=True)
class DecompositionInterval:
    """A horizontal interval of the weak mixing decomposition at height y.

    ``kind`` is "I" for the left half domain and "I_bar" for the right one.
    ``image_y`` is the vertical extent its image under Phi_n must cover.
    """

    kind: str
    j: int
    t: int
    x: Interval
    y: float
    image_y: Interval

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "j": self.j,
            "t": self.t,
            "x": self.x.to_json(),
            "y": self.y,
            "image_y": self.image_y.to_json(),
        }


def core_margins(n: int, r: int) -> tuple[Fraction, Fraction, bool]:
    """(x margin in units of 1/q_n, y margin, fallback) of the decomposition intervals.

    The displayed margins 2/(3nr) empty I^0 when 3nr <= 8 and the height
    range when 3n <= 4; the rigid-zone margins of the weak mixing chart
    (eps1 in x, 2 eps1 / r in y) replace them there.

    Raises:
        ParameterError: If eps1 >= 1/4 and the weak mixing rotations are the identity
    """
    eps1 = Fraction(1, 3 * n * r)
    if eps1 >= Fraction(1, 4):
        raise ParameterError(f"stage {n}, r={r}: eps1={eps1} >= 1/4, the weak mixing rotations are the identity")
    x_margin, y_margin, fallback = 2 * eps1, 2 * eps1, False
    if 2 * x_margin >= Fraction(1, 2):
        x_margin, fallback = eps1, True
    if 2 * y_margin >= Fraction(1, r):
        y_margin, fallback = 2 * eps1 / r, True
    return x_margin, y_margin, fallback


def decomposition_intervals(
    stage: StageBundle,
    t: int,
    heights: Optional[Sequence[float]] = None,
    columns: Optional[Sequence[int]] = None,
) -> List[DecompositionInterval]:
    """I^0_(n,j) and its mirror Ibar^0_(n,j) = I^0_(n,j) + 1/(2q_n) - a_n at the given heights.

    Heights default to three points of the band t away from its margins.

    Raises:
        ParameterError: For variants other than A or a band index out of range
    """
    if stage.variant != "A":
        raise ParameterError("the weak mixing decomposition exists for variant A only")
    r = stage.params.r
    if not 0 <= t < r:
        raise ParameterError(f"band index t must lie in [0, {r}), got {t}")
    n, q = stage.n, stage.q_n
    w = Fraction(1, q)
    x_margin, y_margin, _ = core_margins(n, r)
    if heights is None:
        lo_y = Fraction(t, r) + y_margin
        hi_y = Fraction(t + 1, r) - y_margin
        heights = [float(lo_y + (hi_y - lo_y) * f) for f in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))]
    a = mixing_sequence(stage).a
    # the chart (2q x, r y - t) turns x-length L into y-length 2qL/r
    image = Interval(float(Fraction(t, r) + 2 * x_margin / r), float(Fraction(t + 1, r) - 2 * x_margin / r))
    out: List[DecompositionInterval] = []
    for j in columns if columns is not None else range(q):
        lo = j * w + x_margin * w
        hi = j * w + (Fraction(1, 2) - x_margin) * w
        for y in heights:
            out.append(DecompositionInterval("I", j, t, Interval(lo, hi), float(y), image))
            out.append(DecompositionInterval("I_bar", j, t, Interval(lo + w / 2 - a, hi + w / 2 - a), float(y), image))
    return out


def mixing_map(stage: StageBundle) -> TorusMap:
    """Phi_n = phi_n o P_n o S^m o P_n^-1 o phi_n^-1 with m the mixing time."""
    if stage.phi is None:
        raise ParameterError("Phi_n exists for variant A only")
    seq = mixing_sequence(stage)
    shift = rat_mod1(seq.m * Fraction(stage.p_next, stage.q_next))
    return ComposedMap(
        [stage.phi, stage.P, Translation(shift, label=f"S^{seq.m}"), stage.P.inverse(), stage.phi.inverse()],
        label=f"Phi_{stage.n}",
    )


# ---------------------------------------------------------------------------
# Designated points and growth conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DesignatedPoint:
    point: TorusPoint
    base: TorusPoint
    description: str

    def to_dict(self) -> Dict[str, Any]:
        return {"point": self.point.to_json(), "base": self.base.to_json(), "description": self.description}


def designated_generic_point(stage: StageBundle) -> DesignatedPoint:
    """The torus point whose orbit the genericity test follows.

    Variant A uses (0, (eps3 - 2 eps2)/2). The Cantor variants push a base
    point through H_n: the centre of the first generic cell (kept strip for
    C and D, gap piece for E).
    """
    if stage.variant == "A":
        y = (stage.eps.eps3 - 2 * stage.eps.eps2) / 2  # type: ignore[operator]
        point = TorusPoint(Fraction(0), y)
        return DesignatedPoint(point, stage.H_inv.eval(point), "(0, (eps3 - 2 eps2)/2)")
    fam = stage.catalog["GEN_CELLS" if stage.variant in ("C", "D") else "NONGEN_CELLS"]
    cx, cy = fam.rects[0].center
    base = TorusPoint(cx, cy)
    return DesignatedPoint(stage.H.eval(base), base, f"H_n of the centre of {fam.name}[0]")


@dataclass(frozen=True)
class GrowthCondition:
    name: str
    satisfied: Optional[bool]
    lhs: float
    rhs: float
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "satisfied": self.satisfied, "lhs": self.lhs, "rhs": self.rhs, "note": self.note}


@dataclass(frozen=True)
class StageGrowth:
    n: int
    conditions: tuple[GrowthCondition, ...]

    @property
    def all_satisfied(self) -> bool:
        return all(c.satisfied is not False for c in self.conditions)

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "all_satisfied": self.all_satisfied, "conditions": [c.to_dict() for c in self.conditions]}


def check_growth_conditions(
    stages: Sequence[StageBundle], samples: int = 1024, seed: Optional[int] = None
) -> List[StageGrowth]:
    """Report the growth conditions of every stage; failures never abort.

    Norms are sup norms of the derivative over quasi-random samples. The
    convergence bound takes the smoothness constant C = 1 and the C^1 norm
    as a stand-in for the k-th norm, so it is indicative only.
    """
    seed = config.seed if seed is None else seed
    out: List[StageGrowth] = []
    for stage in stages:
        n, row = stage.n, stage.row
        q, q_next = row.q, stage.q_next
        l_n, k_n = stage.l_n, stage.k_n
        conds: List[GrowthCondition] = []
        conds.append(GrowthCondition("mixing", q_next > 10 * n**2 * q, float(q_next), float(10 * n**2 * q)))
        conds.append(GrowthCondition("minimality", q_next > l_n * q**2, float(q_next), float(l_n * q**2)))
        prev_norm = 1.0 if n == 1 else estimate_sup_norm(stage.H_prev, samples, seed)
        conds.append(
            GrowthCondition("norm_proxy", prev_norm < math.log(q), prev_norm, math.log(q), "||DH_{n-1}||_0 < ln q_n")
        )
        g_norm = 1.0
        if stage.variant == "A":
            g_norm = shear_norm(shear_coefficient(n, q, stage.params.sigma))
        lip = n**2 * prev_norm * g_norm * LIPSCHITZ_BOUND
        conds.append(GrowthCondition("lipschitz", l_n > lip, float(l_n), lip, "l_n > n^2 ||DH_{n-1}|| ||Dg_n|| L"))
        h_norm = estimate_sup_norm(stage.H, samples, seed)
        gap = abs(float(Fraction(stage.p_next, q_next) - row.alpha))
        power = stage.next_row.k or k_n
        bound = 1.0 / (2 ** (n + 1) * k_n * q * h_norm**power)
        conds.append(
            GrowthCondition(
                "convergence",
                gap < bound,
                gap,
                bound,
                "C_k = 1 and the C^1 norm stand in for the C^k norm; indicative only",
            )
        )
        if stage.variant == "A":
            width = k_n * q * float(stage.eps.eps2 * (1 - 4 * stage.eps.eps4))  # type: ignore[operator]
            conds.append(
                GrowthCondition("chart_resolution", width > 1, width, 1.0, "k_n q_n eps2 (1 - 4 eps4) > 1 (about k_n q_n > 24nr)")
            )
        out.append(StageGrowth(n, tuple(conds)))
    return out


def minimality_applicable(stage: StageBundle) -> bool:
    """Whether the minimality mechanism is active: phi^m non-degenerate and both growth conditions hold."""
    if stage.variant != "A" or stage.row.flags is None:
        return False
    eps2, eps4 = stage.eps.eps2, stage.eps.eps4
    resolution = stage.k_n * stage.q_n * eps2 * (1 - 4 * eps4) > 1  # type: ignore[operator]
    return bool(eps4 < Fraction(1, 4) and stage.row.flags.minimality and resolution)  # type: ignore[operator]
