"""Configuration for sdlab: pydantic-settings for the runtime, YAML scenario files."""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from sdlab.errors import ConfigError

_CONFIG_DIR = Path.home() / ".sdlab"
_CONFIG_FILE = _CONFIG_DIR / "config.yaml"


def _load_yaml_defaults() -> dict:
    """Load values from ~/.sdlab/config.yaml if it exists, else return empty dict."""
    if _CONFIG_FILE.exists():
        try:
            with open(_CONFIG_FILE, "r", encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
            return data if isinstance(data, dict) else {}
        except yaml.YAMLError as exc:
            print(f"[warning] Could not parse config file {_CONFIG_FILE}: {exc}", file=sys.stderr)
            return {}
        except OSError as exc:
            print(f"[warning] Could not read config file {_CONFIG_FILE}: {exc}", file=sys.stderr)
            return {}
    return {}


class Settings(BaseSettings):
    """Runtime settings.

    Priority (highest to lowest):
      1. Environment variables (SDLAB_OUTPUT_ROOT, SDLAB_WORKERS, SDLAB_LOG_LEVEL, …)
      2. ~/.sdlab/config.yaml
      3. Defaults defined here
    """

    model_config = SettingsConfigDict(
        env_prefix="SDLAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        populate_by_name=True,
    )

    output_root: Path = Field(default=Path("sdlab-output"))
    workers: int = Field(default=4, ge=1)
    log_level: str = Field(default="WARNING")
    plotdata: bool = Field(default=True)


def get_config_path() -> Path:
    """Return the Path to the user-level YAML settings file."""
    return _CONFIG_FILE


def load_settings() -> Settings:
    """Merge YAML file values with environment variable overrides."""
    yaml_defaults = _load_yaml_defaults()
    init_kwargs = {
        key: yaml_defaults[key]
        for key in ("output_root", "workers", "log_level", "plotdata")
        if key in yaml_defaults
    }
    # BaseSettings ranks init kwargs above the environment, so re-apply env values last.
    env_settings = Settings()
    init_kwargs.update(env_settings.model_dump(include=env_settings.model_fields_set))
    return Settings(**init_kwargs)


def save_settings(settings: Settings) -> None:
    """Write settings to ~/.sdlab/config.yaml."""
    _CONFIG_DIR.mkdir(parents=True, exist_ok=True)
    data = {
        "output_root": str(settings.output_root),
        "workers": settings.workers,
        "log_level": settings.log_level,
        "plotdata": settings.plotdata,
    }
    with open(_CONFIG_FILE, "w", encoding="utf-8") as fh:
        yaml.safe_dump(data, fh, default_flow_style=False, allow_unicode=True)


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSection(_Section):
    kind: Literal["interval", "radial_ball"] = "interval"
    dimension: int = Field(default=1, ge=1)
    num_cells: int = Field(default=256, ge=4)


class NonlinearitySection(_Section):
    name: Literal["model_power", "bounded", "power_pair", "custom_table"] = "model_power"
    gamma: float = Field(default=1.0, gt=0)
    theta: Optional[float] = Field(default=None, gt=0)
    c_infinity: float = Field(default=0.0, ge=0)
    cap: float = Field(default=1.0, gt=0)
    table: list[tuple[float, float]] = Field(default_factory=list)
    envelope_samples_per_unit: int = Field(default=512, ge=8)
    envelope_s_max: float = Field(default=200.0, gt=1.0)


class DatumSection(_Section):
    name: Literal[
        "power_of_distance",
        "boundary_layer",
        "sharp_profile",
        "log_weight",
        "mollified_atom",
        "inverse_power",
        "table",
    ] = "power_of_distance"
    params: dict[str, Any] = Field(default_factory=lambda: {"exponent": 0.0, "scale": 1.0})


class SolverSection(_Section):
    method: Literal["auto", "picard", "newton", "monotone"] = "auto"
    scheme: Literal["truncation", "shift"] = "truncation"
    schedule_max_exponent: int = Field(default=20, ge=0, le=60)
    residual_tol: float = Field(default=1e-10, gt=0)
    bracket_tol: float = Field(default=1e-8, gt=0)
    max_iters: int = Field(default=500, ge=1)
    relaxation: float = Field(default=1.0, gt=0, le=1.0)


class DiagnosticsSection(_Section):
    bounded_ratio: float = Field(default=1.1, gt=1.0)
    divergent_ratio: float = Field(default=1.5, gt=1.0)
    growth_tol: float = Field(default=0.02, ge=0)
    borderline_fraction: float = Field(default=0.05, ge=0)
    eps_list: list[float] = Field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    bd_min_exponent: float = Field(default=0.05, ge=0)
    interior_distances: list[float] = Field(default_factory=lambda: [0.05, 0.1, 0.25])

    @field_validator("eps_list")
    @classmethod
    def _eps_positive(cls, value: list[float]) -> list[float]:
        if not value or any(not 0 < eps < 0.5 for eps in value):
            raise ValueError("eps_list entries must lie in (0, 1/2)")
        return value


class RefinementSection(_Section):
    levels: list[int] = Field(default_factory=lambda: [128, 256, 512, 1024])

    @field_validator("levels")
    @classmethod
    def _at_least_three(cls, value: list[int]) -> list[int]:
        if len(value) < 3:
            raise ValueError("refinement studies need at least 3 levels")
        if sorted(value) != value or any(n < 4 for n in value):
            raise ValueError("levels must be increasing and >= 4")
        return value


class OutputSection(_Section):
    directory: Optional[Path] = None
    plotdata: bool = True


class ScanSection(_Section):
    experiment: Optional[str] = None
    parameters: dict[str, list[Any]] = Field(default_factory=dict)


class ScenarioConfig(_Section):
    """One scenario file: every field defaulted, echoed into every artifact header."""

    grid: GridSection = Field(default_factory=GridSection)
    nonlinearity: NonlinearitySection = Field(default_factory=NonlinearitySection)
    datum: DatumSection = Field(default_factory=DatumSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    diagnostics: DiagnosticsSection = Field(default_factory=DiagnosticsSection)
    refinement: RefinementSection = Field(default_factory=RefinementSection)
    output: OutputSection = Field(default_factory=OutputSection)
    params: dict[str, Any] = Field(default_factory=dict)
    scan: ScanSection = Field(default_factory=ScanSection)


def parse_scenario(data: dict | None) -> ScenarioConfig:
    """Validate a mapping into a ScenarioConfig, raising ConfigError on failure."""
    try:
        return ScenarioConfig.model_validate(data or {})
    except ValidationError as exc:
        raise ConfigError(f"Invalid scenario configuration:\n{exc}") from exc


def load_scenario(path: Path | str | None) -> ScenarioConfig:
    """Load a scenario YAML file; ``None`` yields the fully defaulted scenario."""
    if path is None:
        return ScenarioConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Scenario file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"Could not parse scenario file {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"Scenario file {path} must contain a mapping")
    return parse_scenario(data)


def dump_scenario(cfg: ScenarioConfig) -> str:
    """Serialize a scenario to YAML with stable key order."""
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True, default_flow_style=False)
