"""
Pydantic models for the calibration library: distribution parameters,
per-stage configuration, and the containers passed between stages.
"""
import math
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
import pydantic
from pydantic import ConfigDict, Field, field_validator, model_validator

ResponseKind = Literal["continuous", "binary"]
ModelKind = Literal["linear", "logistic", "mlp"]

# Names of the sampled coordinates, in chain column order.
CONTINUOUS_PARAM_NAMES = ("delta", "log_gamma", "log_sigma2")
BINARY_PARAM_NAMES = ("delta", "log_gamma")


def _as_float_array(value: Any) -> np.ndarray:
    return np.asarray(value, dtype=float)


# ---------------------------------------------------------------------------
# Distribution parameters
# ---------------------------------------------------------------------------

class CauchyParams(pydantic.BaseModel):
    """Location/scale of a Cauchy law. gamma = 0 is the point mass at delta."""
    model_config = ConfigDict(frozen=True)

    delta: float = Field(..., description="Location")
    gamma: float = Field(..., ge=0.0, description="Scale; 0 only as a limit object")


class GaussianParams(pydantic.BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float = 0.0
    sd: float = Field(1.0, gt=0.0)


# ---------------------------------------------------------------------------
# Stage configuration
# ---------------------------------------------------------------------------

class QuadratureConfig(pydantic.BaseModel):
    """Tolerances for the per-observation marginal likelihood integrals."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    rel_tol: float = Field(1e-8, gt=0.0)
    abs_tol: float = Field(1e-12, gt=0.0)
    max_subdivisions: int = Field(200, ge=1)
    continuous_bound: float = Field(39.0, ge=10.0, description="Symmetric truncation of the continuous integral")
    method: Literal["adaptive", "voigt"] = Field(
        "adaptive",
        description="'adaptive' integrates numerically; 'voigt' evaluates the continuous integral in closed form",
    )


class PriorConfig(pydantic.BaseModel):
    """Gaussian priors on delta, log(gamma) and log(sigma^2); variances, not sds."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    delta_mean: float = 1.0
    delta_var: float = Field(400.0, gt=0.0)
    log_gamma_mean: float = 0.0
    log_gamma_var: float = Field(9.0, gt=0.0)
    log_sigma2_mean: float = 0.0
    log_sigma2_var: float = Field(9.0, gt=0.0)


class MhConfig(pydantic.BaseModel):
    """Random walk Metropolis-Hastings schedule."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    total_iters: int = Field(100_000, ge=1)
    burn_in: int = Field(20_000, ge=0)
    keep_last: int = Field(50_000, ge=1)
    n_post: int = Field(300, ge=1)
    init: List[float] = Field(
        default_factory=lambda: [1.0, 0.0, 0.0],
        description="Initial state (delta, log gamma, log sigma^2); truncated to the target dimension",
    )
    init_proposal_sd: float = Field(0.5, gt=0.0)
    target_accept: float = Field(0.30, gt=0.0, lt=1.0)
    adapt_interval: int = Field(100, ge=1)
    adapt_rate: float = Field(1.0, gt=0.0)
    seed: Optional[int] = None

    @model_validator(mode="after")
    def check_schedule(self) -> "MhConfig":
        if self.burn_in + self.keep_last > self.total_iters:
            raise ValueError(
                f"burn_in ({self.burn_in}) + keep_last ({self.keep_last}) exceeds total_iters ({self.total_iters})"
            )
        if self.n_post > self.keep_last:
            raise ValueError(f"n_post ({self.n_post}) exceeds keep_last ({self.keep_last})")
        return self


class MlpConfig(pydantic.BaseModel):
    """Two-layer network training protocol."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    hidden: int = Field(25, ge=1)
    epochs: int = Field(2500, ge=1)
    calibration_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    learning_rate: float = Field(1e-3, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)
    seed: Optional[int] = None


class PredictiveConfig(pydantic.BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_beta: int = Field(300, ge=1)
    n_y: int = Field(300, ge=1)
    rao_blackwellize: bool = True
    alphas: List[float] = Field(default_factory=lambda: [0.05])

    @field_validator("alphas")
    @classmethod
    def check_alphas(cls, v: List[float]) -> List[float]:
        for a in v:
            if not 0.0 < a < 1.0:
                raise ValueError(f"alpha must lie in (0, 1), got {a}")
        return v


# ---------------------------------------------------------------------------
# Sampled parameters
# ---------------------------------------------------------------------------

class ContinuousParams(pydantic.BaseModel):
    """(delta, log gamma, log sigma^2); gamma and sigma are positive by construction."""
    model_config = ConfigDict(frozen=True)

    delta: float
    log_gamma: float
    log_sigma2: float

    @property
    def gamma(self) -> float:
        return math.exp(self.log_gamma)

    @property
    def sigma(self) -> float:
        return math.exp(0.5 * self.log_sigma2)

    def to_array(self) -> np.ndarray:
        return np.array([self.delta, self.log_gamma, self.log_sigma2])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "ContinuousParams":
        return cls(delta=float(x[0]), log_gamma=float(x[1]), log_sigma2=float(x[2]))


class BinaryParams(pydantic.BaseModel):
    model_config = ConfigDict(frozen=True)

    delta: float
    log_gamma: float

    @property
    def gamma(self) -> float:
        return math.exp(self.log_gamma)

    def to_array(self) -> np.ndarray:
        return np.array([self.delta, self.log_gamma])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "BinaryParams":
        return cls(delta=float(x[0]), log_gamma=float(x[1]))


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------

class Dataset(pydantic.BaseModel):
    """Feature matrix and labels. Column 0 is the intercept when has_intercept is set."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    X: np.ndarray
    y: np.ndarray
    response_kind: ResponseKind
    feature_names: List[str] = Field(default_factory=list)
    has_intercept: bool = False

    @field_validator("X", "y", mode="before")
    @classmethod
    def coerce_arrays(cls, v: Any) -> np.ndarray:
        return _as_float_array(v)

    @model_validator(mode="after")
    def check_consistency(self) -> "Dataset":
        if self.X.ndim != 2 or self.y.ndim != 1:
            raise ValueError(f"expected X of rank 2 and y of rank 1, got {self.X.shape} and {self.y.shape}")
        if self.X.shape[0] != self.y.shape[0] or self.X.shape[0] < 1:
            raise ValueError(f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]}")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("dataset contains non-finite entries")
        if self.response_kind == "binary" and not np.all((self.y == 0.0) | (self.y == 1.0)):
            raise ValueError("binary labels must be 0 or 1")
        return self

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def p(self) -> int:
        return int(self.X.shape[1])


class ScoredTarget(pydantic.BaseModel):
    """Source scores f(theta_S, x_i) paired with target labels."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    scores: np.ndarray
    labels: np.ndarray
    response_kind: ResponseKind

    @field_validator("scores", "labels", mode="before")
    @classmethod
    def coerce_arrays(cls, v: Any) -> np.ndarray:
        return _as_float_array(v)

    @model_validator(mode="after")
    def check_consistency(self) -> "ScoredTarget":
        if self.scores.shape != self.labels.shape or self.scores.ndim != 1:
            raise ValueError(f"scores {self.scores.shape} and labels {self.labels.shape} must be matching vectors")
        return self

    @property
    def n(self) -> int:
        return int(self.scores.shape[0])

    def zero_score_rows(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.scores == 0.0)]


class Chain(pydantic.BaseModel):
    """Retained Metropolis-Hastings states in sampling coordinates."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    samples: np.ndarray = Field(..., description="keep_last x d states")
    log_target: np.ndarray = Field(..., description="log target at each retained state")
    param_names: Tuple[str, ...]
    accept_rate: float = Field(..., ge=0.0, le=1.0, description="Acceptance rate after burn-in")
    proposal_sds: np.ndarray
    floor_events: int = 0
    total_iters: int
    burn_in: int
    high_rejection: bool = False

    @property
    def keep_last(self) -> int:
        return int(self.samples.shape[0])

    @property
    def first_iteration(self) -> int:
        """1-based iteration number of the first retained state."""
        return self.total_iters - self.keep_last + 1


class PredictiveDraws(pydantic.BaseModel):
    """Posterior predictive sample for one test point.

    Continuous: label draws, length n_post * n_beta * n_y.
    Binary: expit(beta * f) per beta draw (length n_post * n_beta), or raw
    Bernoulli labels (length n_post * n_beta * n_y) when not Rao-Blackwellized.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    response_kind: ResponseKind
    n_post: int
    n_beta: int
    n_y: int
    rao_blackwellized: bool = False

    @model_validator(mode="after")
    def check_draw_count(self) -> "PredictiveDraws":
        expected = self.n_post * self.n_beta * (1 if self.rao_blackwellized else self.n_y)
        if self.values.size != expected:
            raise ValueError(f"{self.values.size} predictive values, expected {expected}")
        return self

    @property
    def p_tilde(self) -> float:
        if self.response_kind != "binary":
            raise ValueError("p_tilde is defined for binary predictive draws only")
        return float(np.mean(self.values))


class PredictionSet(pydantic.BaseModel):
    """A real interval or a subset of {0, 1} at nominal level 1 - alpha."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["interval", "label_set"]
    nominal_level: float = Field(..., gt=0.0, lt=1.0)
    interval: Optional[Tuple[float, float]] = None
    labels: Optional[Tuple[int, ...]] = None

    @model_validator(mode="after")
    def check_consistency(self) -> "PredictionSet":
        if self.kind == "interval":
            if self.interval is None or not self.interval[0] <= self.interval[1]:
                raise ValueError(f"interval must satisfy lo <= hi, got {self.interval}")
        else:
            if not self.labels or not set(self.labels) <= {0, 1}:
                raise ValueError(f"label set must be a nonempty subset of {{0, 1}}, got {self.labels}")
        return self

    def contains(self, y: float) -> bool:
        if self.kind == "interval":
            lo, hi = self.interval
            return lo <= y <= hi
        return int(y) in self.labels

    def label(self) -> str:
        """Compact text form used in CSV output."""
        if self.kind == "interval":
            return f"[{self.interval[0]!r}, {self.interval[1]!r}]"
        return "{" + ",".join(str(v) for v in self.labels) + "}"


class FitMetadata(pydantic.BaseModel):
    """Bookkeeping attached to a fitted source model."""
    model_config = ConfigDict(extra="allow")

    n_train: int
    iterations: Optional[int] = None
    residual_sd: Optional[float] = None
    condition_number: Optional[float] = None
    best_epoch: Optional[int] = None
    calibration_loss: Optional[float] = None
    calibration_trace: Optional[List[float]] = None
    calibration_rows: Optional[List[int]] = None
    extra: Dict[str, Any] = Field(default_factory=dict)
