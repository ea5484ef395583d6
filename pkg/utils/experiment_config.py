"""Experiment config files: one variant, its rotation schedule and the checks to run."""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import yaml

from .config import config
from .engine import VARIANTS, StageParams
from .errors import ConfigError, ParameterError
from .schedule import RotationSchedule

MAX_STAGES = 4

# Order is the order checks appear in the report
CHECK_NAMES = (
    "schedule",
    "commutation",
    "area",
    "roundtrip",
    "quarter_turn",
    "alignment",
    "distribution",
    "genericity",
    "minimality",
    "mixing",
    "growth",
    "exchange",
    "trapping",
    "confinement",
    "dimension",
)

# Checks that only make sense for some variants
VARIANT_CHECKS = {
    "alignment": ("A",),
    "distribution": ("A",),
    "minimality": ("A",),
    "mixing": ("A",),
    "exchange": ("C", "D", "E"),
    "trapping": ("C", "D", "E"),
    "confinement": ("C", "D", "E"),
    "dimension": ("C", "D", "E"),
}


@dataclass(frozen=True)
class Budgets:
    """Sample counts of the Monte Carlo and sampled checks.

    Attributes:
        mc_samples: Sobol points for the integral of psi o H_n
        map_samples: Sobol points per commutation / area / round-trip check
        full_period_cap: Longest orbit followed point by point
        growth_samples: Sobol points for the derivative norm estimates
        distribution_samples: Points along each decomposition interval
        minimality_points: Orbits used for the cell coverage
        dimension_depth: Cantor depth of the box-counting checks
    """

    mc_samples: int = field(default_factory=lambda: config.mc_samples)
    map_samples: int = 4096
    full_period_cap: int = field(default_factory=lambda: config.full_period_cap)
    growth_samples: int = 1024
    distribution_samples: int = 513
    minimality_points: int = 10
    dimension_depth: int = 8

    def __post_init__(self) -> None:
        for name, value in self.to_dict().items():
            if value < 1:
                raise ConfigError(f"budgets.{name} must be positive, got {value}")
        if self.mc_samples < 2:
            raise ConfigError(f"budgets.mc_samples must be at least 2, got {self.mc_samples}")
        if self.distribution_samples < 3:
            raise ConfigError(f"budgets.distribution_samples must be at least 3, got {self.distribution_samples}")
        if self.dimension_depth < 6:
            raise ConfigError(f"budgets.dimension_depth must be at least 6, got {self.dimension_depth}")

    def to_dict(self) -> Dict[str, int]:
        return {
            "mc_samples": self.mc_samples,
            "map_samples": self.map_samples,
            "full_period_cap": self.full_period_cap,
            "growth_samples": self.growth_samples,
            "distribution_samples": self.distribution_samples,
            "minimality_points": self.minimality_points,
            "dimension_depth": self.dimension_depth,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment.

    ``stages`` holds one (k_n, l_n, s_n) triple per built stage, so the
    schedule reaches stage n_max + 1.
    """

    variant: str
    q1: int
    stages: tuple[tuple[int, int, int], ...]
    r: int = 1
    sigma: float = 0.25
    alpha: Optional[float] = None
    smoothing: float = 0.0
    p1: int = 1
    only: tuple[str, ...] = CHECK_NAMES
    out: str = field(default_factory=lambda: config.output_dir)
    seed: int = field(default_factory=lambda: config.seed)
    budgets: Budgets = field(default_factory=Budgets)

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {', '.join(VARIANTS)}, got {self.variant!r}")
        if not 1 <= len(self.stages) <= MAX_STAGES:
            raise ConfigError(f"n_max out of [1, {MAX_STAGES}]: {len(self.stages)} stages given")
        if self.r < 1:
            raise ConfigError(f"r must be >= 1, got {self.r}")
        if not 0 < self.sigma < 0.5:
            raise ConfigError(f"sigma out of (0, 1/2): {self.sigma}")
        if self.variant in ("D", "E") and (self.alpha is None or not 1 < self.alpha < 2):
            raise ConfigError(f"alpha out of (1, 2): {self.alpha}")
        if self.smoothing < 0:
            raise ConfigError(f"smoothing must be non-negative, got {self.smoothing}")
        unknown = [name for name in self.only if name not in CHECK_NAMES]
        if unknown:
            raise ConfigError(f"unknown check(s) in only: {', '.join(unknown)}")

    @property
    def n_max(self) -> int:
        return len(self.stages)

    @property
    def params(self) -> StageParams:
        try:
            return StageParams(self.variant, self.r, self.sigma, self.alpha, self.smoothing)
        except ParameterError as e:
            raise ConfigError(str(e)) from e

    def schedule(self) -> RotationSchedule:
        """Rotation schedule through stage n_max + 1.

        Raises:
            ConfigError: If q1 or a multiplier is rejected by the schedule
        """
        try:
            return RotationSchedule.from_multipliers(self.q1, self.stages, self.p1)
        except ParameterError as e:
            raise ConfigError(f"stages: {e}") from e

    def selected_checks(self) -> List[str]:
        """Selected checks that apply to the variant, in report order."""
        return [
            name
            for name in CHECK_NAMES
            if name in self.only and self.variant in VARIANT_CHECKS.get(name, VARIANTS)
        ]

    def with_overrides(
        self,
        out: Optional[str] = None,
        seed: Optional[int] = None,
        only: Optional[Sequence[str]] = None,
    ) -> "ExperimentConfig":
        """Copy with command-line overrides applied (None keeps the file's value)."""
        changes: Dict[str, Any] = {}
        if out is not None:
            changes["out"] = out
        if seed is not None:
            changes["seed"] = seed
        if only is not None:
            changes["only"] = tuple(only)
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant,
            "q1": self.q1,
            "p1": self.p1,
            "n_max": self.n_max,
            "stages": [list(triple) for triple in self.stages],
            "r": self.r,
            "sigma": self.sigma,
            "alpha": self.alpha,
            "smoothing": self.smoothing,
            "only": list(self.only),
            "seed": self.seed,
            "budgets": self.budgets.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Build a config from parsed YAML/JSON.

        Raises:
            ConfigError: Naming the missing or malformed field
        """
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        for key in ("variant", "q1", "stages"):
            if key not in data:
                raise ConfigError(f"missing required field: {key}")
        stages = _parse_stages(data["stages"])
        if "n_max" in data:
            n_max = _as_int(data, "n_max")
            if not 1 <= n_max <= min(len(stages), MAX_STAGES):
                raise ConfigError(f"n_max out of [1, {min(len(stages), MAX_STAGES)}]: {n_max}")
            stages = stages[:n_max]
        budgets = data.get("budgets") or {}
        if not isinstance(budgets, dict):
            raise ConfigError("budgets must be a mapping")
        unknown = sorted(set(budgets) - set(Budgets().to_dict()))
        if unknown:
            raise ConfigError(f"unknown budget(s): {', '.join(unknown)}")
        only = data.get("only")
        kwargs: Dict[str, Any] = {
            "variant": str(data["variant"]).upper(),
            "q1": _as_int(data, "q1"),
            "stages": stages,
            "r": _as_int(data, "r", 1),
            "sigma": _as_float(data, "sigma", 0.25),
            "alpha": None if data.get("alpha") is None else _as_float(data, "alpha"),
            "smoothing": _as_float(data, "smoothing", 0.0),
            "p1": _as_int(data, "p1", 1),
            "budgets": Budgets(**{k: _as_int(budgets, k) for k in budgets}),
        }
        if only is not None:
            kwargs["only"] = tuple(_parse_only(only))
        if data.get("out") is not None:
            kwargs["out"] = str(data["out"])
        if data.get("seed") is not None:
            kwargs["seed"] = _as_int(data, "seed")
        return cls(**kwargs)

    @classmethod
    def load_from_file(cls, filepath: str) -> "ExperimentConfig":
        """Load an experiment from a YAML or JSON file.

        Args:
            filepath: Path to the config file

        Returns:
            ExperimentConfig instance

        Raises:
            ConfigError: If the file is missing, unparsable or invalid
        """
        try:
            with open(filepath, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"{filepath} not found") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"{filepath} is not valid YAML/JSON: {e}") from e
        try:
            return cls.from_dict(data)
        except ConfigError as e:
            raise ConfigError(f"{filepath}: {e}") from e


def parse_only(text: str) -> List[str]:
    """Split a comma-separated --only value, validating every name."""
    names = [s.strip() for s in text.split(",") if s.strip()]
    return _parse_only(names)


def _parse_only(value: Any) -> List[str]:
    names = [value] if isinstance(value, str) else list(value)
    names = [str(n).strip() for n in names]
    unknown = [n for n in names if n not in CHECK_NAMES]
    if unknown:
        raise ConfigError(f"unknown check(s) in only: {', '.join(unknown)}")
    return names


def _parse_stages(value: Any) -> tuple[tuple[int, int, int], ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError("stages must be a non-empty list of (k, l, s) entries")
    out = []
    for i, entry in enumerate(value, start=1):
        if isinstance(entry, dict):
            try:
                entry = [entry["k"], entry["l"], entry["s"]]
            except KeyError as e:
                raise ConfigError(f"stages[{i}] is missing {e}") from e
        if not isinstance(entry, (list, tuple)) or len(entry) != 3:
            raise ConfigError(f"stages[{i}] must be (k, l, s), got {entry!r}")
        try:
            k, l, s = (int(v) for v in entry)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"stages[{i}] must hold integers, got {entry!r}") from e
        out.append((k, l, s))
    return tuple(out)


def _as_int(data: Dict[str, Any], key: str, default: Optional[int] = None) -> int:
    value = data.get(key, default)
    if isinstance(value, bool) or value is None:
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    try:
        return int(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key} must be an integer, got {value!r}") from e


def _as_float(data: Dict[str, Any], key: str, default: Optional[float] = None) -> float:
    value = data.get(key, default)
    if isinstance(value, bool) or value is None:
        raise ConfigError(f"{key} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key} must be a number, got {value!r}") from e
