"""Configuration for the experiment harness.

Two layers:

- ``HarnessSettings``: run-level knobs read from ``PSRV_*`` environment
  variables or a ``.env`` file (output directory, worker count, logging).
- Experiment models (``ScenarioConfig``, ``EmpiricalConfig``, ...): pydantic
  models loaded from JSON/TOML files or from the built-in presets.
"""

from __future__ import annotations

import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings

from psrv_lab.errors import ConfigError
from psrv_lab.logging_utils import default_workers
from psrv_lab.sde import CklsParams, NoiseSpec
from psrv_lab.spotvol import FourierConfig
from psrv_lab.utils import YearLayout, config_hash, stride_between

logger = logging.getLogger(__name__)


class HarnessSettings(BaseSettings):
    # Output
    out_dir: str = "results"
    output_format: Literal["csv", "json"] = "csv"

    # Execution
    workers: int = Field(default_factory=default_workers, ge=1)
    paths_per_task: int = Field(8, ge=1)

    # Logging
    log_level: str = "INFO"

    model_config = {"env_prefix": "PSRV_", "env_file": ".env", "extra": "ignore"}


@lru_cache
def get_settings() -> HarnessSettings:
    return HarnessSettings()


# ---------------------------------------------------------------------------
# Experiment models
# ---------------------------------------------------------------------------


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ParamSetConfig(_Strict):
    """One named parameter set of the variance and price legs."""

    name: str = "custom"
    alpha: float
    theta: float
    gamma: float
    nu0: float
    beta: float = 0.5
    mu: float = 0.0
    rho: float = 0.0

    @model_validator(mode="after")
    def _check_model(self) -> ParamSetConfig:
        # ParameterError is a ValueError, so pydantic reports it per model
        self.to_params()
        return self

    def to_params(self, rho: float | None = None) -> CklsParams:
        return CklsParams(
            alpha=self.alpha,
            theta=self.theta,
            gamma=self.gamma,
            nu0=self.nu0,
            beta=self.beta,
            mu=self.mu,
            rho=self.rho if rho is None else rho,
        )


class NoiseConfig(_Strict):
    """Either a noise-to-signal ratio ``zeta`` or an explicit variance ``v_eta``."""

    zeta: float | None = None
    v_eta: float | None = None

    @model_validator(mode="after")
    def _check_noise(self) -> NoiseConfig:
        self.to_spec()
        return self

    def to_spec(self) -> NoiseSpec:
        return NoiseSpec(v_eta=self.v_eta, zeta=self.zeta)


class YearLayoutConfig(_Strict):
    days: int = Field(252, ge=1)
    hours_per_day: float = Field(6.0, gt=0, le=24)

    def to_layout(self) -> YearLayout:
        return YearLayout(days=self.days, hours_per_day=self.hours_per_day)


class FourierSettings(_Strict):
    n_cut: int | None = Field(None, ge=1)
    m_cut: int | None = Field(None, ge=1)
    kernel: Literal["fejer", "dirichlet"] = "fejer"
    span_years: float = Field(1.0, gt=0)

    def to_config(self) -> FourierConfig:
        return FourierConfig(n_cut=self.n_cut, m_cut=self.m_cut, kernel=self.kernel)


TuningMode = Literal["fixed", "oracle", "feasible"]


class ScenarioConfig(_Strict):
    """A Monte Carlo experiment: model, sampling, tuning cells and seed.

    Every combination of ``price_mesh_seconds`` and ``grid_multiples`` (and of
    ``kappas`` in fixed mode) is one cell of the resulting table.
    """

    name: str = "scenario"
    param_set: ParamSetConfig
    noise: NoiseConfig | None = None
    n_paths: int = Field(200, ge=1)
    master_seed: int = Field(0, ge=0)
    year_layout: YearLayoutConfig = YearLayoutConfig()
    days: int = Field(252, ge=1)
    warmup_days: int | None = Field(None, ge=0)
    sim_mesh_seconds: float = Field(1.0, gt=0)
    price_mesh_seconds: list[float] = Field(default_factory=lambda: [60.0], min_length=1)
    grid_multiples: list[int] = Field(default_factory=lambda: [1], min_length=1)
    tuning_mode: TuningMode = "oracle"
    kappas: list[float] = Field(default_factory=list)
    b: float = -0.5
    c: float = 0.25
    horizon_days: int = Field(1, ge=1)
    rho_override: float | None = Field(None, ge=-1.0, le=1.0)
    fourier: FourierSettings = FourierSettings()

    @field_validator("grid_multiples")
    @classmethod
    def _positive_multiples(cls, value: list[int]) -> list[int]:
        if any(m < 1 for m in value):
            raise ValueError("every Delta_N must be a positive integer multiple of delta_N")
        return value

    @field_validator("kappas")
    @classmethod
    def _positive_kappas(cls, value: list[float]) -> list[float]:
        if any(not k > 0 for k in value):
            raise ValueError("kappas must be positive")
        return value

    @model_validator(mode="after")
    def _check_sampling(self) -> ScenarioConfig:
        day_seconds = self.year_layout.hours_per_day * 3600.0
        stride_between(day_seconds, self.sim_mesh_seconds)
        for mesh in self.price_mesh_seconds:
            stride_between(mesh, self.sim_mesh_seconds)
            stride_between(day_seconds, mesh)
        if self.tuning_mode == "fixed" and not self.kappas:
            raise ValueError("tuning_mode 'fixed' needs a non-empty kappas list")
        if self.tuning_mode != "fixed" and self.kappas:
            raise ValueError(f"kappas are only used in fixed mode, not {self.tuning_mode!r}")
        if self.noise is not None and self.noise.zeta is not None and self.sim_mesh_seconds != 1.0:
            raise ValueError("zeta calibration needs sim_mesh_seconds = 1")
        if not -1.0 < self.b <= 0.0 or not 0.0 < self.c < 1.0:
            raise ValueError(f"rates need b in (-1, 0] and c in (0, 1), got b={self.b}, c={self.c}")
        return self

    def params(self) -> CklsParams:
        return self.param_set.to_params(self.rho_override)

    def layout(self) -> YearLayout:
        return self.year_layout.to_layout()

    def noise_spec(self) -> NoiseSpec | None:
        if self.noise is None:
            return None
        spec = self.noise.to_spec()
        return None if spec.is_zero else spec

    def config_hash(self) -> str:
        return config_hash(self.model_dump(mode="json"))


class ThresholdConfig(_Strict):
    """Parameter sets and lambda grid for the no-overlap threshold curves."""

    name: str = "thresholds"
    param_sets: list[ParamSetConfig] = Field(min_length=1)
    tau_days: float = Field(5.0, ge=0)
    horizon_days: float = Field(1.0, gt=0)
    n_points: int = Field(50, ge=2)
    overlap_lam: float = Field(0.0006, gt=0)
    c: float = Field(0.25, gt=0, lt=0.5)
    year_layout: YearLayoutConfig = YearLayoutConfig()

    def config_hash(self) -> str:
        return config_hash(self.model_dump(mode="json"))


class IngestSettings(_Strict):
    """Column mapping and resampling of an input price file."""

    timestamp_column: str = "timestamp"
    price_column: str = "price"
    mesh_seconds: float = Field(60.0, gt=0)
    session_start: str | None = None
    session_end: str | None = None
    drop_overnight: bool = True

    @model_validator(mode="after")
    def _check_session(self) -> IngestSettings:
        if (self.session_start is None) != (self.session_end is None):
            raise ValueError("session_start and session_end go together")
        return self


class EmpiricalConfig(_Strict):
    """Daily PSRV series from an ingested price file."""

    name: str = "empirical"
    ingest: IngestSettings = IngestSettings()
    year_layout: YearLayoutConfig = YearLayoutConfig()
    grid_multiples: list[int] = Field(default_factory=lambda: [5, 10, 15, 30], min_length=1)
    kappa_mode: Literal["feasible", "fixed"] = "feasible"
    kappa: float | None = Field(None, gt=0)
    beta: float | Literal["auto"] = 0.5
    beta_criterion: Literal["loglik", "r2"] = "loglik"
    b: float = -0.5
    c: float = 0.25
    fourier: FourierSettings = FourierSettings()

    @model_validator(mode="after")
    def _check_kappa(self) -> EmpiricalConfig:
        if self.kappa_mode == "fixed" and self.kappa is None:
            raise ValueError("kappa_mode 'fixed' needs kappa")
        if any(m < 1 for m in self.grid_multiples):
            raise ValueError("grid_multiples must be >= 1")
        return self

    def config_hash(self) -> str:
        return config_hash(self.model_dump(mode="json"))


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def config_error_from(exc: ValidationError, label: str) -> ConfigError:
    """Flatten a pydantic validation error into one field-level ConfigError."""
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return ConfigError(f"invalid {label}: " + "; ".join(parts))


def read_mapping(path: str | Path) -> dict[str, Any]:
    """Read a JSON or TOML config file into a dict."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        if p.suffix.lower() == ".toml":
            with open(p, "rb") as f:
                return tomllib.load(f)
        with open(p, encoding="utf-8") as f:
            data = json.load(f)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{p} must hold a mapping at top level")
    return data


def build(model: type[BaseModel], data: dict[str, Any], label: str | None = None) -> Any:
    label = label or model.__name__
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise config_error_from(exc, label) from exc


def override(cfg: BaseModel, **changes: Any) -> Any:
    """Re-validated copy of ``cfg`` with the non-None ``changes`` applied."""
    changes = {k: v for k, v in changes.items() if v is not None}
    if not changes:
        return cfg
    data = cfg.model_dump()
    data.update(changes)
    return build(type(cfg), data)


def load_config(source: str | Path, model: type[BaseModel]) -> Any:
    """Load ``model`` from a preset name or a JSON/TOML file."""
    from .presets import get_preset

    preset = get_preset(str(source))
    if preset is not None:
        if not isinstance(preset, model):
            raise ConfigError(f"preset {source!r} is a {type(preset).__name__}, not a {model.__name__}")
        logger.info("Using built-in preset %s", source)
        return preset
    return build(model, read_mapping(source), f"{model.__name__} in {source}")
