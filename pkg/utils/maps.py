"""Area-preserving maps of the torus and the elementary conjugacies built from them.

Every map evaluates numpy coordinate arrays in one call (``apply`` /
``apply_inverse``) and knows its differential analytically (``jacobian``).
Scalar evaluation (``eval``) wraps the array path, so a point gets the same
floating-point operations either way.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Type

import numpy as np
from scipy.stats import qmc

from .errors import ParameterError
from .numerics import Rect, TorusPoint, circle_diff, format_rational, parse_rational, wrap_unit

# Registry of map kinds for JSON round trips
MAP_TYPES: Dict[str, Type["TorusMap"]] = {}

# Quarter-turn powers R^k with R(u, v) = (v, -u), the clockwise rotation
_ROTATIONS = np.array(
    [
        [[1.0, 0.0], [0.0, 1.0]],
        [[0.0, 1.0], [-1.0, 0.0]],
        [[-1.0, 0.0], [0.0, -1.0]],
        [[0.0, -1.0], [1.0, 0.0]],
    ]
)


def register_map(kind: str) -> Callable[[Type["TorusMap"]], Type["TorusMap"]]:
    """Class decorator adding a map class to the JSON registry."""

    def decorator(cls: Type["TorusMap"]) -> Type["TorusMap"]:
        cls.kind = kind
        MAP_TYPES[kind] = cls
        return cls

    return decorator


def map_from_dict(data: Dict[str, Any]) -> "TorusMap":
    """Rebuild a map from its ``to_dict`` description.

    Raises:
        ParameterError: If the kind is unknown
    """
    kind = data.get("kind")
    if kind not in MAP_TYPES:
        raise ParameterError(f"unknown map kind: {kind!r}")
    return MAP_TYPES[kind].from_dict(data)


def _identity_jacobian(count: int) -> np.ndarray:
    return np.broadcast_to(np.eye(2), (count, 2, 2)).copy()


def _det2(jac: np.ndarray) -> np.ndarray:
    return jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]


def as_arrays(xs: Any, ys: Any) -> tuple[np.ndarray, np.ndarray]:
    """Coerce scalars or sequences into float64 arrays."""
    return np.atleast_1d(np.asarray(xs, dtype=float)), np.atleast_1d(np.asarray(ys, dtype=float))


class TorusMap(ABC):
    """Invertible, area-preserving, piecewise-defined map of [0,1)^2."""

    kind: str = "abstract"

    def __init__(self, label: str) -> None:
        self.label = label

    @abstractmethod
    def apply(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Forward image of coordinate arrays."""

    @abstractmethod
    def apply_inverse(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Inverse image of coordinate arrays."""

    @abstractmethod
    def jacobian(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Differential at each point as an (N, 2, 2) array."""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready description sufficient to rebuild the map."""

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TorusMap":
        raise ParameterError(f"map kind {cls.kind!r} cannot be rebuilt from JSON")

    def jacobian_determinant(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Analytic determinant of the differential."""
        return _det2(self.jacobian(xs, ys))

    def inverse(self) -> "TorusMap":
        return InverseMap(self)

    def eval(self, p: TorusPoint) -> TorusPoint:
        xs, ys = self.apply(*as_arrays(float(p.x), float(p.y)))
        return TorusPoint(float(xs[0]), float(ys[0]))

    def eval_inverse(self, p: TorusPoint) -> TorusPoint:
        xs, ys = self.apply_inverse(*as_arrays(float(p.x), float(p.y)))
        return TorusPoint(float(xs[0]), float(ys[0]))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.label!r})"


@register_map("identity")
class IdentityMap(TorusMap):
    """The identity of the torus."""

    def __init__(self, label: str = "id") -> None:
        super().__init__(label)

    def apply(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return xs.copy(), ys.copy()

    def apply_inverse(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return xs.copy(), ys.copy()

    def jacobian(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return _identity_jacobian(len(xs))

    def inverse(self) -> TorusMap:
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "label": self.label}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> TorusMap:
        return cls(data.get("label", "id"))


@register_map("translation")
class Translation(TorusMap):
    """S_t: translation by an exact rational vector."""

    def __init__(self, tx: Fraction, ty: Fraction = Fraction(0), label: Optional[str] = None) -> None:
        self.tx = Fraction(tx)
        self.ty = Fraction(ty)
        super().__init__(label or f"S_{format_rational(self.tx)}")

    def apply(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return wrap_unit(xs + float(self.tx)), wrap_unit(ys + float(self.ty))

    def apply_inverse(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return wrap_unit(xs - float(self.tx)), wrap_unit(ys - float(self.ty))

    def jacobian(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return _identity_jacobian(len(xs))

    def inverse(self) -> TorusMap:
        return Translation(-self.tx, -self.ty, label=f"{self.label}^-1")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "label": self.label,
            "tx": format_rational(self.tx),
            "ty": format_rational(self.ty),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> TorusMap:
        return cls(parse_rational(data["tx"]), parse_rational(data["ty"]), label=data.get("label"))


@register_map("horizontal_shear")
class HorizontalShear(TorusMap):
    """(x, y) -> (x + c*y, y) with integer c."""

    def __init__(self, coefficient: int, label: Optional[str] = None) -> None:
        self.coefficient = int(coefficient)
        super().__init__(label or f"shear[{self.coefficient}]")

    def apply(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return wrap_unit(xs + self.coefficient * ys), ys.copy()

    def apply_inverse(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return wrap_unit(xs - self.coefficient * ys), ys.copy()

    def jacobian(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        jac = _identity_jacobian(len(xs))
        jac[:, 0, 1] = self.coefficient
        return jac

    def inverse(self) -> TorusMap:
        return HorizontalShear(-self.coefficient, label=f"{self.label}^-1")

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "label": self.label, "coefficient": self.coefficient}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> TorusMap:
        return cls(int(data["coefficient"]), label=data.get("label"))


def shear_coefficient(n: int, q_n: int, sigma: float) -> int:
    """Integer part of n * q_n**sigma."""
    return int(math.floor(n * q_n**sigma))


def shear_norm(coefficient: int) -> float:
    """Operator norm of [[1, c], [0, 1]] in closed form."""
    c = float(coefficient)
    return math.sqrt((2.0 + c * c + abs(c) * math.sqrt(c * c + 4.0)) / 2.0)


def shear_g(n: int, q_n: int, sigma: float) -> HorizontalShear:
    """The stage shear g_n(x, y) = (x + floor(n q_n^sigma) y, y).

    Raises:
        ParameterError: If n < 1, q_n < 2 or sigma is outside (0, 1/2)
    """
    if n < 1 or q_n < 2:
        raise ParameterError(f"shear needs n >= 1 and q_n >= 2, got n={n}, q_n={q_n}")
    if not 0 < sigma < 0.5:
        raise ParameterError("sigma out of (0, 1/2)")
    return HorizontalShear(shear_coefficient(n, q_n, sigma), label=f"g_{n}")


def _smoothstep(s: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Twist profile beta(s) and its derivative on the band [1/2-2eps, 1/2-eps]."""
    w = np.clip((0.5 - eps - s) / eps, 0.0, 1.0)
    beta = w * w * (3.0 - 2.0 * w)
    dbeta = (6.0 * w - 6.0 * w * w) * (-1.0 / eps)
    return beta, dbeta


def _square_polar(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Side index k, side coordinate a in [-s, s) and sup-radius s around the center."""
    s = np.maximum(np.abs(u), np.abs(v))
    top = (v >= np.abs(u)) & (u < v)
    right = (u >= np.abs(v)) & (v > -u)
    bottom = (-v >= np.abs(u)) & (u > v)
    k = np.select([top, right, bottom], [0, 1, 2], default=3)
    a = np.select([top, right, bottom], [u, -v, -u], default=v)
    return k, a, s


def _from_square_polar(k: np.ndarray, a: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = np.select([k == 0, k == 1, k == 2], [a, s, -a], default=-s)
    v = np.select([k == 0, k == 1, k == 2], [s, -a, -s], default=a)
    return u, v


@register_map("quarter_turn")
class QuarterTurn(TorusMap):
    """Square twist of the unit square: rigid quarter turn inside, identity near the edge.

    Each point keeps its sup-norm radius s about (1/2, 1/2) and slides along
    that square by beta(s) quarter perimeters. Acts on unit-square
    coordinates and never wraps, so it can sit inside an affine chart.
    """

    def __init__(self, eps: Fraction, clockwise: bool = True, label: Optional[str] = None) -> None:
        self.eps = Fraction(eps)
        self.clockwise = clockwise
        self.direction = 1.0 if clockwise else -1.0
        arrow = "" if clockwise else "^-1"
        super().__init__(label or f"phi({format_rational(self.eps)}){arrow}")

    def _twist(self, xs: np.ndarray, ys: np.ndarray, direction: float) -> tuple[np.ndarray, np.ndarray]:
        out_x, out_y = xs.copy(), ys.copy()
        u, v = xs - 0.5, ys - 0.5
        k, a, s = _square_polar(u, v)
        beta, _ = _smoothstep(s, float(self.eps))
        moving = (beta > 0.0) & (s > 0.0)
        if not moving.any():
            return out_x, out_y
        k, a, s, beta = k[moving], a[moving], s[moving], beta[moving]
        theta = np.mod(k / 4.0 + (a + s) / (8.0 * s) + direction * beta / 4.0, 1.0)
        k2 = np.clip(np.floor(4.0 * theta).astype(np.int64), 0, 3)
        a2 = -s + 8.0 * s * (theta - k2 / 4.0)
        u2, v2 = _from_square_polar(k2, a2, s)
        out_x[moving] = 0.5 + u2
        out_y[moving] = 0.5 + v2
        return out_x, out_y

    def apply(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._twist(xs, ys, self.direction)

    def apply_inverse(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._twist(xs, ys, -self.direction)

    def jacobian(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        jac = _identity_jacobian(len(xs))
        u, v = xs - 0.5, ys - 0.5
        k, a, s = _square_polar(u, v)
        beta, dbeta = _smoothstep(s, float(self.eps))
        center = (s == 0.0) & (beta > 0.0)
        jac[center] = _ROTATIONS[1] if self.direction > 0 else _ROTATIONS[3]
        moving = (beta > 0.0) & (s > 0.0)
        if not moving.any():
            return jac
        k, a, s, beta, dbeta = k[moving], a[moving], s[moving], beta[moving], dbeta[moving]
        count = len(s)
        theta = np.mod(k / 4.0 + (a + s) / (8.0 * s) + self.direction * beta / 4.0, 1.0)
        k2 = np.clip(np.floor(4.0 * theta).astype(np.int64), 0, 3)
        a2 = -s + 8.0 * s * (theta - k2 / 4.0)
        # (a, s) -> (theta, s)
        d_angle = np.zeros((count, 2, 2))
        d_angle[:, 0, 0] = 1.0 / (8.0 * s)
        d_angle[:, 0, 1] = -a / (8.0 * s * s)
        d_angle[:, 1, 1] = 1.0
        # twist
        d_twist = _identity_jacobian(count)
        d_twist[:, 0, 1] = self.direction * dbeta / 4.0
        # (theta', s) -> (a', s)
        d_side = np.zeros((count, 2, 2))
        d_side[:, 0, 0] = 8.0 * s
        d_side[:, 0, 1] = a2 / s
        d_side[:, 1, 1] = 1.0
        rot_in = np.transpose(_ROTATIONS[k], (0, 2, 1))
        rot_out = _ROTATIONS[k2]
        jac[moving] = rot_out @ d_side @ d_twist @ d_angle @ rot_in
        return jac

    def inverse(self) -> TorusMap:
        return QuarterTurn(self.eps, clockwise=not self.clockwise)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "label": self.label,
            "eps": format_rational(self.eps),
            "clockwise": self.clockwise,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> TorusMap:
        return cls(parse_rational(data["eps"]), clockwise=bool(data["clockwise"]), label=data.get("label"))


def quarter_turn(eps: Any) -> QuarterTurn:
    """The clockwise quarter-turn map phi(eps).

    Identity outside [eps, 1-eps]^2, rigid clockwise rotation by pi/2 about
    (1/2, 1/2) on [2eps, 1-2eps]^2.

    Raises:
        ParameterError: If eps is not in (0, 1/4)
    """
    eps = Fraction(eps)
    if not 0 < eps < Fraction(1, 4):
        raise ParameterError(f"quarter turn needs 0 < eps < 1/4, got {eps}")
    return QuarterTurn(eps, clockwise=True)


@dataclass(frozen=True)
class AffineChart:
    """Affine chart (x, y) -> (scale_x * x + shift_x, scale_y * y + shift_y)."""

    scale_x: Fraction
    scale_y: Fraction
    shift_x: Fraction = Fraction(0)
    shift_y: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        if self.scale_x == 0 or self.scale_y == 0:
            raise ParameterError("chart scales must be non-zero")

    def to_unit(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return float(self.scale_x) * xs + float(self.shift_x), float(self.scale_y) * ys + float(self.shift_y)

    def from_unit(self, us: np.ndarray, vs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (us - float(self.shift_x)) / float(self.scale_x), (vs - float(self.shift_y)) / float(self.scale_y)

    def exact_image(self, x: Fraction, y: Fraction) -> tuple[Fraction, Fraction]:
        return self.scale_x * x + self.shift_x, self.scale_y * y + self.shift_y

    def to_dict(self) -> Dict[str, str]:
        return {
            "scale_x": format_rational(self.scale_x),
            "scale_y": format_rational(self.scale_y),
            "shift_x": format_rational(self.shift_x),
            "shift_y": format_rational(self.shift_y),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, str]) -> "AffineChart":
        return cls(*(parse_rational(data[key]) for key in ("scale_x", "scale_y", "shift_x", "shift_y")))


@dataclass(frozen=True)
class ChartPiece:
    """One active region of a piecewise map: chart^-1 o inner o chart on ``region``."""

    region: Rect
    chart: AffineChart
    inner: TorusMap


def _rect_from_json(values: Sequence[str]) -> Rect:
    return Rect(*(parse_rational(v) for v in values))


@register_map("piecewise")
class PiecewiseMap(TorusMap):
    """Block-conjugated map repeated with an x-period; identity off the pieces.

    Pieces are tested in insertion order and the first match wins.
    """

    def __init__(
        self,
        pieces: Sequence[ChartPiece],
        period: Fraction,
        label: str,
        degenerate: bool = False,
    ) -> None:
        self.pieces = tuple(pieces)
        self.period = Fraction(period)
        self.degenerate = degenerate
        super().__init__(label)

    def _run(
        self, xs: np.ndarray, ys: np.ndarray, inverse: bool
    ) -> tuple[np.ndarray, np.ndarray]:
        period = float(self.period)
        xb = np.mod(xs, period)
        offset = xs - xb
        out_x, out_y = xs.copy(), ys.copy()
        assigned = np.zeros(len(xs), dtype=bool)
        for piece in self.pieces:
            mask = ~assigned & piece.region.contains_arrays(xb, ys)
            if not mask.any():
                continue
            us, vs = piece.chart.to_unit(xb[mask], ys[mask])
            if inverse:
                us, vs = piece.inner.apply_inverse(us, vs)
            else:
                us, vs = piece.inner.apply(us, vs)
            bx, by = piece.chart.from_unit(us, vs)
            out_x[mask] = bx + offset[mask]
            out_y[mask] = by
            assigned |= mask
        return wrap_unit(out_x), wrap_unit(out_y)

    def apply(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._run(xs, ys, inverse=False)

    def apply_inverse(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._run(xs, ys, inverse=True)

    def _piece_masks(self, xs: np.ndarray, ys: np.ndarray) -> List[tuple[ChartPiece, np.ndarray, np.ndarray]]:
        xb = np.mod(xs, float(self.period))
        assigned = np.zeros(len(xs), dtype=bool)
        found = []
        for piece in self.pieces:
            mask = ~assigned & piece.region.contains_arrays(xb, ys)
            if mask.any():
                found.append((piece, mask, xb[mask]))
            assigned |= mask
        return found

    def jacobian(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        jac = _identity_jacobian(len(xs))
        for piece, mask, xb in self._piece_masks(xs, ys):
            us, vs = piece.chart.to_unit(xb, ys[mask])
            inner = piece.inner.jacobian(us, vs)
            sx, sy = float(piece.chart.scale_x), float(piece.chart.scale_y)
            conj = inner.copy()
            conj[:, 0, 1] *= sy / sx
            conj[:, 1, 0] *= sx / sy
            jac[mask] = conj
        return jac

    def jacobian_determinant(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        det = np.ones(len(xs))
        for piece, mask, xb in self._piece_masks(xs, ys):
            us, vs = piece.chart.to_unit(xb, ys[mask])
            det[mask] = piece.inner.jacobian_determinant(us, vs)
        return det

    def inverse(self) -> TorusMap:
        pieces = [ChartPiece(p.region, p.chart, p.inner.inverse()) for p in self.pieces]
        return PiecewiseMap(pieces, self.period, f"{self.label}^-1", self.degenerate)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "label": self.label,
            "period": format_rational(self.period),
            "degenerate": self.degenerate,
            "pieces": [
                {"region": p.region.to_json(), "chart": p.chart.to_dict(), "inner": p.inner.to_dict()}
                for p in self.pieces
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> TorusMap:
        pieces = [
            ChartPiece(_rect_from_json(p["region"]), AffineChart.from_dict(p["chart"]), map_from_dict(p["inner"]))
            for p in data["pieces"]
        ]
        return cls(pieces, parse_rational(data["period"]), data["label"], bool(data.get("degenerate", False)))


@register_map("composed")
class ComposedMap(TorusMap):
    """f_1 o f_2 o ... o f_k, stored outermost first."""

    def __init__(self, factors: Sequence[TorusMap], label: Optional[str] = None) -> None:
        flat: List[TorusMap] = []
        for f in factors:
            if isinstance(f, ComposedMap):
                flat.extend(f.factors)
            elif not isinstance(f, IdentityMap):
                flat.append(f)
        self.factors = tuple(flat)
        super().__init__(label or " o ".join(f.label for f in self.factors) or "id")

    def apply(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        for f in reversed(self.factors):
            xs, ys = f.apply(xs, ys)
        return xs, ys

    def apply_inverse(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        for f in self.factors:
            xs, ys = f.apply_inverse(xs, ys)
        return xs, ys

    def jacobian(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        jac = _identity_jacobian(len(xs))
        for f in reversed(self.factors):
            jac = f.jacobian(xs, ys) @ jac
            xs, ys = f.apply(xs, ys)
        return jac

    def jacobian_determinant(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        # chain rule on determinants; avoids cancellation in the product matrix
        det = np.ones(len(xs))
        for f in reversed(self.factors):
            det = det * f.jacobian_determinant(xs, ys)
            xs, ys = f.apply(xs, ys)
        return det

    def inverse(self) -> TorusMap:
        return ComposedMap([f.inverse() for f in reversed(self.factors)], label=f"({self.label})^-1")

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "label": self.label, "factors": [f.to_dict() for f in self.factors]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> TorusMap:
        return cls([map_from_dict(f) for f in data["factors"]], label=data.get("label"))


@register_map("inverse")
class InverseMap(TorusMap):
    """Generic inverse wrapper for maps without a closed-form inverse class."""

    def __init__(self, base: TorusMap) -> None:
        self.base = base
        super().__init__(f"{base.label}^-1")

    def apply(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.base.apply_inverse(xs, ys)

    def apply_inverse(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.base.apply(xs, ys)

    def jacobian(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        px, py = self.base.apply_inverse(xs, ys)
        fwd = self.base.jacobian(px, py)
        det = _det2(fwd)
        inv = np.empty_like(fwd)
        inv[:, 0, 0] = fwd[:, 1, 1] / det
        inv[:, 1, 1] = fwd[:, 0, 0] / det
        inv[:, 0, 1] = -fwd[:, 0, 1] / det
        inv[:, 1, 0] = -fwd[:, 1, 0] / det
        return inv

    def jacobian_determinant(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        px, py = self.base.apply_inverse(xs, ys)
        return 1.0 / self.base.jacobian_determinant(px, py)

    def inverse(self) -> TorusMap:
        return self.base

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "base": self.base.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> TorusMap:
        return cls(map_from_dict(data["base"]))


def compose(outer: TorusMap, inner: TorusMap) -> TorusMap:
    """outer o inner; the inverse composes in reverse order."""
    return ComposedMap([outer, inner])


@dataclass(frozen=True)
class KappaProfile:
    """Periodic tent profile kappa: rises to ``peak`` at ``x_peak``, back to 0 at ``x_end``.

    With ``smoothing`` > 0 every corner is replaced by a quadratic blend of
    that half-width, which keeps the profile C^1.
    """

    period: Fraction
    peak: float
    x_peak: Fraction
    x_end: Fraction
    smoothing: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.x_peak < self.x_end <= self.period:
            raise ParameterError("kappa breakpoints must satisfy 0 < x_peak < x_end <= period")
        if self.peak < 0:
            raise ParameterError("kappa peak must be non-negative")
        limit = min(self.x_peak, self.x_end - self.x_peak) / 2
        if self.smoothing < 0 or self.smoothing >= float(limit):
            raise ParameterError(f"kappa smoothing must lie in [0, {float(limit)})")

    @classmethod
    def for_minimality(cls, n: int, q_n: int, eps2: Fraction, smoothing: float = 0.0) -> "KappaProfile":
        """Tent of height 1/n^2 supported on [0, eps2/q_n] of each 1/q_n period."""
        return cls(
            period=Fraction(1, q_n),
            peak=1.0 / n**2,
            x_peak=Fraction(eps2) / (2 * q_n),
            x_end=Fraction(eps2) / q_n,
            smoothing=smoothing,
        )

    @classmethod
    def for_trapping(cls, n: int, q_n: int, s_n: int, delta: float, smoothing: float = 0.0) -> "KappaProfile":
        """Full-period tent of height delta/n^2 and period 1/(s_n q_n)."""
        period = Fraction(1, s_n * q_n)
        return cls(period=period, peak=delta / n**2, x_peak=period / 2, x_end=period, smoothing=smoothing)

    def _knots(self) -> List[tuple[float, float]]:
        up = self.peak / float(self.x_peak)
        down = self.peak / float(self.x_end - self.x_peak)
        if self.x_end < self.period:
            return [(0.0, up), (float(self.x_peak), -up - down), (float(self.x_end), down)]
        return [(0.0, up + down), (float(self.x_peak), -up - down)]

    def _local(self, xs: np.ndarray) -> np.ndarray:
        return np.mod(xs, float(self.period))

    def value(self, xs: np.ndarray) -> np.ndarray:
        u = self._local(xs)
        xp, xe = float(self.x_peak), float(self.x_end)
        rising = self.peak * (u / xp)
        falling = self.peak * ((xe - u) / (xe - xp))
        out = np.where(u < xp, rising, np.where(u < xe, falling, 0.0))
        if self.smoothing > 0:
            out = out + self._blend(u, derivative=False)
        return out

    def derivative(self, xs: np.ndarray) -> np.ndarray:
        u = self._local(xs)
        xp, xe = float(self.x_peak), float(self.x_end)
        out = np.where(u < xp, self.peak / xp, np.where(u < xe, -self.peak / (xe - xp), 0.0))
        if self.smoothing > 0:
            out = out + self._blend(u, derivative=True)
        return out

    def _blend(self, u: np.ndarray, derivative: bool) -> np.ndarray:
        w = self.smoothing
        period = float(self.period)
        total = np.zeros_like(u)
        for knot, jump in self._knots():
            d = np.mod(u - knot + period / 2, period) - period / 2
            near = np.abs(d) < w
            if derivative:
                corr = (d + w) / (2 * w) - (d > 0)
            else:
                corr = (d + w) ** 2 / (4 * w) - np.maximum(d, 0.0)
            total += np.where(near, jump * corr, 0.0)
        return total

    def to_dict(self) -> Dict[str, Any]:
        return {
            "period": format_rational(self.period),
            "peak": self.peak,
            "x_peak": format_rational(self.x_peak),
            "x_end": format_rational(self.x_end),
            "smoothing": self.smoothing,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "KappaProfile":
        return cls(
            period=parse_rational(data["period"]),
            peak=float(data["peak"]),
            x_peak=parse_rational(data["x_peak"]),
            x_end=parse_rational(data["x_end"]),
            smoothing=float(data.get("smoothing", 0.0)),
        )


@register_map("kappa_shear")
class KappaShear(TorusMap):
    """P(x, y) = (x, y + kappa(x)); exactly invertible vertical shear."""

    def __init__(self, profile: KappaProfile, sign: int = 1, label: Optional[str] = None) -> None:
        self.profile = profile
        self.sign = 1 if sign >= 0 else -1
        super().__init__(label or ("P" if self.sign > 0 else "P^-1"))

    def apply(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return xs.copy(), wrap_unit(ys + self.sign * self.profile.value(xs))

    def apply_inverse(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return xs.copy(), wrap_unit(ys - self.sign * self.profile.value(xs))

    def jacobian(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        jac = _identity_jacobian(len(xs))
        jac[:, 1, 0] = self.sign * self.profile.derivative(xs)
        return jac

    def inverse(self) -> TorusMap:
        return KappaShear(self.profile, -self.sign, label=f"{self.label}^-1")

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "label": self.label, "sign": self.sign, "profile": self.profile.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> TorusMap:
        return cls(KappaProfile.from_dict(data["profile"]), int(data["sign"]), label=data.get("label"))


def build_P(profile: KappaProfile, label: str = "P") -> KappaShear:
    """Vertical shear by the kappa profile."""
    return KappaShear(profile, label=label)


def block_conjugate(inner: TorusMap, chart: AffineChart, active_region: Rect, period: Fraction) -> PiecewiseMap:
    """chart^-1 o inner o chart on the active region, identity elsewhere, repeated with ``period``.

    Raises:
        ParameterError: If the chart does not map the region onto the unit
            square or the period is not 1/k
    """
    period = Fraction(period)
    if period <= 0 or (1 / period).denominator != 1:
        raise ParameterError(f"period must be 1/k for an integer k, got {period}")
    corners = (
        chart.exact_image(Fraction(active_region.x0), Fraction(active_region.y0)),
        chart.exact_image(Fraction(active_region.x1), Fraction(active_region.y1)),
    )
    if corners != ((0, 0), (1, 1)):
        raise ParameterError(f"chart does not map {active_region} onto the unit square")
    if active_region.x0 < 0 or active_region.x1 > period:
        raise ParameterError("active region must lie inside one period")
    label = f"C^-1 o {inner.label} o C"
    if isinstance(inner, IdentityMap):
        return PiecewiseMap([], period, label)
    return PiecewiseMap([ChartPiece(active_region, chart, inner)], period, label)


def stage_epsilons(n: int, q_n: int, r: int) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """(eps1, eps2, eps3, eps4) = (1/(3nr), eps1/8, eps1/2, 1/(2^n q_n))."""
    eps1 = Fraction(1, 3 * n * r)
    return eps1, eps1 / 8, eps1 / 2, Fraction(1, 2**n * q_n)


def _check_stage(n: int, q_n: int, r: int) -> None:
    if n < 1 or q_n < 2 or r < 1:
        raise ParameterError(f"stage needs n >= 1, q_n >= 2, r >= 1, got n={n}, q_n={q_n}, r={r}")


def _degenerate(label: str, period: Fraction) -> PiecewiseMap:
    return PiecewiseMap([], period, f"{label} (degenerate)", degenerate=True)


def build_phi_w(n: int, q_n: int, r: int) -> PiecewiseMap:
    """Anticlockwise quarter turns on each half domain [0, 1/2q_n) x [t/r, (t+1)/r)."""
    _check_stage(n, q_n, r)
    eps1, _, _, _ = stage_epsilons(n, q_n, r)
    period = Fraction(1, q_n)
    if eps1 >= Fraction(1, 4):
        return _degenerate(f"phi_w[{n}]", period)
    inner = quarter_turn(eps1).inverse()
    pieces: List[ChartPiece] = []
    for t in range(r):
        region = Rect(Fraction(0), Fraction(1, 2 * q_n), Fraction(t, r), Fraction(t + 1, r))
        chart = AffineChart(Fraction(2 * q_n), Fraction(r), Fraction(0), Fraction(-t))
        pieces.extend(block_conjugate(inner, chart, region, period).pieces)
    return PiecewiseMap(pieces, period, f"phi_w[{n}]")


def build_phi_g(n: int, q_n: int, r: int) -> PiecewiseMap:
    """Double rotation phi^-1(eps3) o phi(eps2) on every 1/q_n column."""
    _check_stage(n, q_n, r)
    _, eps2, eps3, _ = stage_epsilons(n, q_n, r)
    inner = compose(quarter_turn(eps3).inverse(), quarter_turn(eps2))
    region = Rect(Fraction(0), Fraction(1, q_n), Fraction(0), Fraction(1))
    chart = AffineChart(Fraction(q_n), Fraction(1))
    block = block_conjugate(inner, chart, region, Fraction(1, q_n))
    return PiecewiseMap(block.pieces, block.period, f"phi_g[{n}]")


def build_phi_m(n: int, q_n: int, r: int) -> PiecewiseMap:
    """Quarter turn phi(eps4) on each thin strip R_{n,i} = [i/q_n, (i+eps2)/q_n) x T."""
    _check_stage(n, q_n, r)
    _, eps2, _, eps4 = stage_epsilons(n, q_n, r)
    period = Fraction(1, q_n)
    if eps4 >= Fraction(1, 4):
        return _degenerate(f"phi_m[{n}]", period)
    region = Rect(Fraction(0), eps2 / q_n, Fraction(0), Fraction(1))
    chart = AffineChart(q_n / eps2, Fraction(1))
    block = block_conjugate(quarter_turn(eps4), chart, region, period)
    return PiecewiseMap(block.pieces, period, f"phi_m[{n}]")


def assemble_phi(n: int, q_n: int, r: int) -> TorusMap:
    """phi_n = phi_g o phi_m o phi_w."""
    return ComposedMap([build_phi_g(n, q_n, r), build_phi_m(n, q_n, r), build_phi_w(n, q_n, r)], label=f"phi_{n}")


def assemble_h(n: int, q_n: int, r: int, sigma: float, profile: KappaProfile) -> TorusMap:
    """h_n = g_n o phi_n o P_n."""
    return ComposedMap([shear_g(n, q_n, sigma), assemble_phi(n, q_n, r), build_P(profile, f"P_{n}")], label=f"h_{n}")


def jacobian_det(m: TorusMap, p: TorusPoint, h: float = 1e-6) -> float:
    """Central finite-difference determinant of Dm at p.

    Raises:
        ParameterError: If h is outside [1e-7, 1e-4]
    """
    if not 1e-7 <= h <= 1e-4:
        raise ParameterError(f"finite-difference step must lie in [1e-7, 1e-4], got {h}")
    x, y = float(p.x), float(p.y)
    xs = np.array([x + h, x - h, x, x])
    ys = np.array([y, y, y + h, y - h])
    fx, fy = m.apply(xs, ys)
    a = circle_diff(fx[0:1], fx[1:2])[0] / (2 * h)
    c = circle_diff(fy[0:1], fy[1:2])[0] / (2 * h)
    b = circle_diff(fx[2:3], fx[3:4])[0] / (2 * h)
    d = circle_diff(fy[2:3], fy[3:4])[0] / (2 * h)
    return float(a * d - b * c)


def sobol_points(count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Scrambled Sobol points in [0,1)^2 (count rounded up to a power of two)."""
    m = max(1, int(math.ceil(math.log2(max(count, 2)))))
    sampler = qmc.Sobol(d=2, scramble=True, seed=seed)
    pts = sampler.random_base2(m=m)[:count]
    return pts[:, 0].copy(), pts[:, 1].copy()


def estimate_sup_norm(m: TorusMap, samples: int = 1024, seed: int = 0) -> float:
    """Largest operator norm of Dm over quasi-random samples (the ||D.||_0 proxy)."""
    xs, ys = sobol_points(samples, seed)
    jac = m.jacobian(xs, ys)
    return float(np.linalg.norm(jac, ord=2, axis=(1, 2)).max())
