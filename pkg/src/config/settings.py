import json
import logging
import tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from recast.errors import ConfigError
from recast.schemas import MhConfig, MlpConfig, PredictiveConfig, PriorConfig, QuadratureConfig, ResponseKind

# Project root directory (recast-calibration/)
PROJECT_ROOT = Path(__file__).parent.parent.parent.resolve()

MethodName = Literal["recast_linear", "recast_dnn", "dnn", "unfreeze_dnn"]

DEFAULT_NOMINAL_LEVELS = [round(0.50 + 0.01 * i, 2) for i in range(50)]


def _resolve(v: str | Path) -> Path:
    path = Path(v)
    if not path.is_absolute():
        return (PROJECT_ROOT / path).resolve()
    return path.resolve()


class Settings(BaseSettings):
    """Process-level settings, read from RECAST_* environment variables or the .env file."""
    model_config = SettingsConfigDict(
        env_prefix="RECAST_",
        env_file=str(PROJECT_ROOT / ".env"),
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Output Paths
    output_dir: Path = Field(default=PROJECT_ROOT / "outputs")
    log_dir: Path = Field(default=PROJECT_ROOT / "logs")

    # Execution
    threads: int = Field(default=1, ge=1)
    master_seed: int = Field(default=20230101)

    @field_validator("output_dir", "log_dir", mode="before")
    @classmethod
    def resolve_path(cls, v: str | Path) -> Path:
        return _resolve(v)


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

class GridConfig(BaseModel):
    """Synthetic experiment grid."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_targets: List[int] = Field(default_factory=lambda: [20, 40, 60, 100, 250])
    sigma_tl2: List[float] = Field(default_factory=lambda: [0.0, 0.25, 1.0, 4.0])
    response_kinds: List[ResponseKind] = Field(default_factory=lambda: ["continuous", "binary"])
    replicates: int = Field(300, ge=1)
    n_source: int = Field(1000, ge=10)
    p: int = Field(50, ge=2, description="Number of features including the intercept")
    n_test: int = Field(250, ge=1)
    methods: List[MethodName] = Field(default_factory=lambda: ["recast_linear", "recast_dnn", "dnn", "unfreeze_dnn"])
    nominal_levels: List[float] = Field(default_factory=lambda: list(DEFAULT_NOMINAL_LEVELS))

    @field_validator("sigma_tl2")
    @classmethod
    def check_sigma(cls, v: List[float]) -> List[float]:
        if any(s < 0.0 for s in v):
            raise ValueError(f"sigma_tl2 values must be nonnegative, got {v}")
        return v

    @field_validator("nominal_levels")
    @classmethod
    def check_levels(cls, v: List[float]) -> List[float]:
        if any(not 0.0 < lvl < 1.0 for lvl in v):
            raise ValueError("nominal levels must lie in (0, 1)")
        return sorted(v)

    @field_validator("n_targets")
    @classmethod
    def check_sizes(cls, v: List[int]) -> List[int]:
        if any(n < 1 for n in v):
            raise ValueError(f"target sizes must be positive, got {v}")
        return v


class RunConfig(BaseModel):
    """Everything a command needs beyond its file arguments. Unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)
    prior: PriorConfig = Field(default_factory=PriorConfig)
    mcmc: MhConfig = Field(default_factory=MhConfig)
    predictive: PredictiveConfig = Field(default_factory=PredictiveConfig)
    mlp: MlpConfig = Field(default_factory=MlpConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    seed: Optional[int] = None
    threads: Optional[int] = Field(None, ge=1)
    desk_scale: bool = False
    output_dir: Optional[Path] = None

    @field_validator("output_dir", mode="before")
    @classmethod
    def resolve_path(cls, v: Optional[str | Path]) -> Optional[Path]:
        return None if v is None else _resolve(v)

    @classmethod
    def desk_scale_preset(cls, **overrides: Any) -> "RunConfig":
        """Reduced profile: 30 replicates, 20k iterations (5k burn-in, last 10k kept),
        n_post = n_beta = n_y = 100, closed-form continuous integrals."""
        return apply_desk_scale(cls(**overrides))

    def with_overrides(self, **updates: Any) -> "RunConfig":
        data = self.model_dump()
        data.update({k: v for k, v in updates.items() if v is not None})
        return validate_run_config(data)


def apply_desk_scale(cfg: RunConfig) -> RunConfig:
    data = cfg.model_dump()
    data["desk_scale"] = True
    data["grid"]["replicates"] = 30
    data["mcmc"].update(total_iters=20_000, burn_in=5_000, keep_last=10_000, n_post=100)
    data["predictive"].update(n_beta=100, n_y=100)
    data["quadrature"]["method"] = "voigt"
    return validate_run_config(data)


def validate_run_config(data: Dict[str, Any]) -> RunConfig:
    """RunConfig from a plain mapping; validation failures become ConfigError."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()[:5]
        )
        raise ConfigError(f"invalid configuration ({e.error_count()} error(s)): {details}") from e


def load_run_config(path: Optional[Path] = None) -> RunConfig:
    """
    Read a .toml or .json run configuration; None gives the defaults.
    A top-level ``desk_scale = true`` applies the reduced profile before the
    file's explicit values are re-applied on top.
    """
    logger = logging.getLogger(__name__)
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read configuration file {path}: {e}") from e
    try:
        if path.suffix == ".toml":
            data = tomllib.loads(text)
        elif path.suffix == ".json":
            data = json.loads(text)
        else:
            raise ConfigError(f"configuration file must be .toml or .json, got {path.name}")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e

    if isinstance(data, dict) and data.get("desk_scale"):
        data = _deep_merge(apply_desk_scale(RunConfig()).model_dump(), data)
    cfg = validate_run_config(data)
    logger.info(f"Loaded run configuration from {path} (desk_scale={cfg.desk_scale})")
    return cfg


def _deep_merge(base: Dict[str, Any], updates: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def write_effective_config(cfg: RunConfig, out_dir: Path, extra: Optional[Dict[str, Any]] = None) -> Path:
    """Write the fully resolved configuration as effective_config.json in out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = cfg.model_dump(mode="json")
    if extra:
        payload["command"] = extra
    path = out_dir / "effective_config.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    return path


# Initialize settings
settings = Settings()
