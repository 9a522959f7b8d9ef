from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Literal
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dotenv import load_dotenv
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationInfo,
    field_validator,
    model_validator,
)

from mongelab.errors import ConfigError

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "MONGELAB_SEED"
EXPERIMENT_KINDS = (
    "solve",
    "certify",
    "pmtc",
    "lmtc",
    "c1",
    "nonbranching",
    "cone",
    "doubling",
    "uniqueness",
    "suite",
)
ExperimentKind = Literal[
    "solve",
    "certify",
    "pmtc",
    "lmtc",
    "c1",
    "nonbranching",
    "cone",
    "doubling",
    "uniqueness",
    "suite",
]
SUITE_CRITERIA = (1, 2, 3, 4, 5, 6, 7, 8)


def _resolve_path(value: Path | None, info: ValidationInfo) -> Path | None:
    if value is None:
        return None
    candidate = Path(value).expanduser()
    base = (info.context or {}).get("config_dir")
    if not candidate.is_absolute() and base is not None:
        return (Path(base) / candidate).resolve()
    return candidate


def _strictly_decreasing(values: list[float] | None, label: str) -> list[float] | None:
    if values is None:
        return None
    if not values:
        raise ValueError(f"{label} must be nonempty")
    if any(v <= 0 for v in values):
        raise ValueError(f"{label} entries must be > 0")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{label} must be strictly decreasing")
    return values


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SpaceSpec(StrictModel):
    kind: Literal["normed", "finite"] = "normed"
    norm: Literal["euclidean", "lp", "l1", "linf"] = "euclidean"
    dim: PositiveInt = 2
    p: float | None = None
    labels: list[str] | None = None
    matrix: list[list[float]] | None = None
    matrix_file: Path | None = None

    @field_validator("matrix_file")
    @classmethod
    def resolve_matrix_file(cls, value: Path | None, info: ValidationInfo) -> Path | None:
        return _resolve_path(value, info)

    @model_validator(mode="after")
    def check_kind(self) -> "SpaceSpec":
        if self.kind == "finite" and self.matrix is None and self.matrix_file is None:
            raise ValueError("finite spaces need `matrix` or `matrix_file`")
        if self.kind == "normed" and self.norm == "lp" and (self.p is None or self.p <= 1):
            raise ValueError("lp norms need p > 1")
        return self


class CostSpec(StrictModel):
    kind: Literal["squared_distance", "distance", "power", "table"] = "squared_distance"
    exponent: float | None = Field(default=None, ge=1.0)
    table: list[list[float]] | None = None
    table_file: Path | None = None

    @field_validator("table_file")
    @classmethod
    def resolve_table_file(cls, value: Path | None, info: ValidationInfo) -> Path | None:
        return _resolve_path(value, info)

    @model_validator(mode="after")
    def check_kind(self) -> "CostSpec":
        if self.kind == "power" and self.exponent is None:
            raise ValueError("power costs need `exponent`")
        if self.kind == "table" and self.table is None and self.table_file is None:
            raise ValueError("table costs need `table` or `table_file`")
        return self


class MeasureSpec(StrictModel):
    points: list[list[float]] | list[str] | None = None
    weights: list[float] | None = None
    csv: Path | None = None
    normalize: bool = False

    @field_validator("csv")
    @classmethod
    def resolve_csv(cls, value: Path | None, info: ValidationInfo) -> Path | None:
        return _resolve_path(value, info)

    @model_validator(mode="after")
    def check_source(self) -> "MeasureSpec":
        if (self.points is None) == (self.csv is None):
            raise ValueError("measures need exactly one of `points` or `csv`")
        if self.csv is not None and self.weights is not None:
            raise ValueError("`weights` cannot be combined with `csv`")
        return self


class InstanceSpec(StrictModel):
    name: str = Field(..., min_length=1)
    n: PositiveInt | None = None


class DensitySpec(StrictModel):
    name: str = Field(..., min_length=1)
    params: dict[str, Any] = Field(default_factory=dict)


class TripleSpec(StrictModel):
    x: list[float]
    y: list[float]
    z: list[float] | None = None


class TwistSpec(StrictModel):
    mode: Literal["ratio", "epsilon_scan", "neighbourhood"] = "ratio"
    epsilon: PositiveFloat | None = None
    s_schedule: list[float] = Field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    r1: PositiveFloat = 0.05
    r2: PositiveFloat | None = None
    inner_budget: PositiveInt = 64
    outer_budget: PositiveInt = 10_000
    conservative_margin: float = Field(default=1.0, ge=0.0)
    refine_steps: NonNegativeInt = 8
    delta: PositiveFloat = 0.01
    points: PositiveInt = 5

    @field_validator("s_schedule")
    @classmethod
    def check_schedule(cls, values: list[float]) -> list[float]:
        return _strictly_decreasing(values, "s_schedule") or values


class ConeSpec(StrictModel):
    x: list[float]
    end: list[float] | None = None
    k: PositiveFloat | None = None
    directions: NonNegativeInt = 0
    length: PositiveFloat = 1.0
    radii: list[float] | None = None
    r0: PositiveFloat = 0.1
    levels: PositiveInt = 7
    budget: PositiveInt = 10_000

    @field_validator("radii")
    @classmethod
    def check_radii(cls, values: list[float] | None) -> list[float] | None:
        return _strictly_decreasing(values, "radii")

    @model_validator(mode="after")
    def check_target(self) -> "ConeSpec":
        if self.end is None and self.directions == 0:
            raise ValueError("cone experiments need `end` or `directions` > 0")
        return self


class DoublingSpec(StrictModel):
    center: list[float] | str | None = None
    radii: list[float] | None = None
    r0: PositiveFloat = 0.1
    levels: PositiveInt = 7
    budget: PositiveInt = 10_000

    @field_validator("radii")
    @classmethod
    def check_radii(cls, values: list[float] | None) -> list[float] | None:
        return _strictly_decreasing(values, "radii")


class NonBranchingSpec(StrictModel):
    r: PositiveFloat = 0.05
    t_schedule: list[float] = Field(default_factory=lambda: [1e-2, 1e-3, 1e-4, 1e-5])
    triple_budget: PositiveInt = 64
    project: bool = False
    certificate: bool = True
    dual_samples: PositiveInt = 10_000

    @field_validator("t_schedule")
    @classmethod
    def check_schedule(cls, values: list[float]) -> list[float]:
        if not values or any(not 0 < t <= 1 for t in values):
            raise ValueError("t_schedule entries must lie in (0, 1]")
        return values


class UniquenessSpec(StrictModel):
    trials: NonNegativeInt = 8


class CertifySpec(StrictModel):
    pairs_csv: Path | None = None
    sources: list[list[float]] | list[str] | None = None
    targets: list[list[float]] | list[str] | None = None

    @field_validator("pairs_csv")
    @classmethod
    def resolve_pairs(cls, value: Path | None, info: ValidationInfo) -> Path | None:
        return _resolve_path(value, info)

    @model_validator(mode="after")
    def check_pairs(self) -> "CertifySpec":
        if (self.sources is None) != (self.targets is None):
            raise ValueError("`sources` and `targets` must be given together")
        if self.pairs_csv is not None and self.sources is not None:
            raise ValueError("use either `pairs_csv` or inline pairs, not both")
        return self


class C1Spec(StrictModel):
    epsilon: float = Field(default=0.5, ge=0.0)
    r1: PositiveFloat = 0.05
    r2: PositiveFloat = 0.05
    delta: PositiveFloat = 0.01
    budget: PositiveInt = 10_000
    centers: list[list[float]] | None = None


class SuiteSpec(StrictModel):
    scale: float = Field(default=1.0, gt=0.0, le=1.0)
    criteria: list[int] = Field(default_factory=lambda: list(SUITE_CRITERIA))

    @field_validator("criteria")
    @classmethod
    def check_criteria(cls, values: list[int]) -> list[int]:
        unknown = sorted(set(values) - set(SUITE_CRITERIA))
        if unknown:
            raise ValueError(f"unknown suite criteria {unknown}")
        return sorted(set(values))


_REQUIRED_SECTIONS: dict[str, tuple[str, ...]] = {
    "pmtc": ("reference", "triple", "twist"),
    "lmtc": ("reference", "triple", "twist"),
    "c1": ("triple",),
    "nonbranching": ("triple",),
    "cone": ("reference", "cone"),
    "doubling": ("doubling",),
}


class ExperimentConfig(StrictModel):
    experiment: ExperimentKind
    seed: NonNegativeInt = 0
    workers: PositiveInt = 1
    output_dir: Path | None = None
    space: SpaceSpec = Field(default_factory=SpaceSpec)
    cost: CostSpec | None = None
    source: MeasureSpec | None = None
    target: MeasureSpec | None = None
    instance: InstanceSpec | None = None
    reference: DensitySpec | None = None
    triple: TripleSpec | None = None
    twist: TwistSpec | None = None
    cone: ConeSpec | None = None
    doubling: DoublingSpec | None = None
    nonbranching: NonBranchingSpec = Field(default_factory=NonBranchingSpec)
    uniqueness: UniquenessSpec = Field(default_factory=UniquenessSpec)
    certify: CertifySpec | None = None
    c1: C1Spec = Field(default_factory=C1Spec)
    suite: SuiteSpec = Field(default_factory=SuiteSpec)

    @field_validator("output_dir")
    @classmethod
    def resolve_output(cls, value: Path | None, info: ValidationInfo) -> Path | None:
        return _resolve_path(value, info)

    @model_validator(mode="after")
    def check_sections(self) -> "ExperimentConfig":
        kind = self.experiment
        if kind in ("solve", "uniqueness", "certify", "pmtc", "lmtc", "c1"):
            if self.cost is None and self.instance is None:
                raise ValueError(f"`{kind}` experiments need a `cost` section")
        if kind in ("solve", "uniqueness"):
            self._require_marginals()
        if kind == "certify":
            pairs = self.certify
            has_pairs = pairs is not None and (
                pairs.pairs_csv is not None or pairs.sources is not None
            )
            if not has_pairs:
                self._require_marginals()
        for section in _REQUIRED_SECTIONS.get(kind, ()):
            if getattr(self, section) is None:
                raise ValueError(f"`{kind}` experiments need a `{section}` section")
        if kind in ("pmtc", "lmtc", "nonbranching") and self.triple is not None:
            if self.triple.z is None:
                raise ValueError(f"`{kind}` experiments need `triple.z`")
        if kind == "doubling" and self.source is None and self.reference is None:
            raise ValueError("`doubling` experiments need `source` or `reference`")
        return self

    def _require_marginals(self) -> None:
        if self.instance is None and (self.source is None or self.target is None):
            raise ValueError(
                f"`{self.experiment}` experiments need `source` and `target` or an `instance`"
            )

    def echo(self) -> dict[str, Any]:
        return self.model_dump(mode="json", exclude_none=True)


def resolve_config_path(path: str | Path) -> Path:
    candidate = Path(path).expanduser()
    if not candidate.is_absolute():
        candidate = (Path.cwd() / candidate).resolve()
    return candidate


def _load_toml(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with path.open("rb") as handle:
            return tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid TOML: {exc}") from exc


def _parse_seed(value: str, label: str) -> int:
    try:
        seed = int(value.strip())
    except ValueError as exc:
        raise ConfigError(f"Expected {label} to be an integer, got '{value}'") from exc
    if seed < 0:
        raise ConfigError(f"Expected {label} >= 0, got {seed}")
    return seed


def load_experiment_config(
    path: str | Path,
    *,
    seed: int | None = None,
    env_file: str | Path | None = None,
) -> ExperimentConfig:
    """Parse a TOML experiment file; seed precedence is --seed, MONGELAB_SEED, file."""
    config_path = resolve_config_path(path)
    raw = _load_toml(config_path)
    load_dotenv(Path(env_file) if env_file is not None else Path.cwd() / ".env", override=False)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed:
        raw["seed"] = _parse_seed(env_seed, SEED_ENV_VAR)
    if seed is not None:
        if seed < 0:
            raise ConfigError(f"Expected --seed >= 0, got {seed}")
        raw["seed"] = seed
    config = ExperimentConfig.model_validate(raw, context={"config_dir": config_path.parent})
    logger.debug(
        "mongelab.config.loaded",
        extra={"path": str(config_path), "experiment": config.experiment, "seed": config.seed},
    )
    return config
