'''
Pydantic models and column constants for the tables the CLI and the
simulation harness read and write.
'''
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

# --- Constants for Data Consistency ---
# Single source of truth for result-file headers and method display names.
RESPONSE_KINDS = ["continuous", "binary"]
METHODS = ["recast_linear", "recast_dnn", "dnn", "unfreeze_dnn"]
METHOD_LABELS = {
    ("continuous", "recast_linear"): "RECaST-LM",
    ("binary", "recast_linear"): "RECaST-GLM",
    ("continuous", "recast_dnn"): "RECaST-DNN",
    ("binary", "recast_dnn"): "RECaST-DNN",
    ("continuous", "dnn"): "DNN",
    ("binary", "dnn"): "DNN",
    ("continuous", "unfreeze_dnn"): "Unfreeze DNN",
    ("binary", "unfreeze_dnn"): "Unfreeze DNN",
}
KEY_COLUMNS = ["response_kind", "n_target", "sigma_tl2", "replicate"]
GROUP_COLUMNS = ["response_kind", "n_target", "sigma_tl2", "method"]
RESULT_COLUMNS = KEY_COLUMNS + [
    "method",
    "method_label",
    "status",
    "error",
    "rmse",
    "rmse_mean",
    "auc",
    "posterior_delta_mean",
    "accept_rate",
    "floor_events",
]
COVERAGE_PREFIX = "cov_"
SET_PREFIX = "set_"
COVERED_PREFIX = "covered_"


def coverage_column(level: float) -> str:
    """Column name of the empirical coverage at a nominal level, e.g. cov_0.95."""
    return f"{COVERAGE_PREFIX}{level:.2f}"


def coverage_level(column: str) -> float:
    return float(column[len(COVERAGE_PREFIX):])


class MetricsRecord(BaseModel):
    '''
    One row of the results CSV: a (scenario, replicate, method) evaluation.
    Coverage columns (cov_0.50 ... cov_0.99) are carried as extra fields.
    '''
    model_config = ConfigDict(extra="allow")

    response_kind: Literal[*RESPONSE_KINDS]
    n_target: int = Field(..., ge=1)
    sigma_tl2: float = Field(..., ge=0.0)
    replicate: int = Field(..., ge=0)
    method: Literal[*METHODS]
    method_label: str
    status: Literal["ok", "failed"]
    error: Optional[str] = None
    rmse: Optional[float] = Field(None, ge=0.0)  # against the noisy test labels
    rmse_mean: Optional[float] = Field(None, ge=0.0)  # against the noiseless mean
    auc: Optional[float] = Field(None, ge=0.0, le=1.0)
    posterior_delta_mean: Optional[float] = None
    accept_rate: Optional[float] = Field(None, ge=0.0, le=1.0)
    floor_events: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def check_coverage(self) -> "MetricsRecord":
        for name, value in (self.model_extra or {}).items():
            if not name.startswith(COVERAGE_PREFIX):
                raise ValueError(f"unexpected column {name!r}")
            if value is not None and not 0.0 <= float(value) <= 1.0:
                raise ValueError(f"{name} = {value} is outside [0, 1]")
        return self


class PredictionRecord(BaseModel):
    '''
    One row of the predict command's output CSV. Set columns (set_<alpha>)
    and coverage indicators are carried as extra fields.
    '''
    model_config = ConfigDict(extra="allow")

    row: int = Field(..., ge=0)
    f_tilde: float
    point: float
    p_tilde: Optional[float] = Field(None, ge=0.0, le=1.0)
    label: Optional[float] = None

    @model_validator(mode="after")
    def check_extra_columns(self) -> "PredictionRecord":
        for name, value in (self.model_extra or {}).items():
            if name.startswith(SET_PREFIX):
                if not isinstance(value, str):
                    raise ValueError(f"{name} must be a set label, got {value!r}")
            elif name.startswith(COVERED_PREFIX):
                if self.label is None:
                    raise ValueError(f"{name} given for a row without a label")
                if not isinstance(value, bool):
                    raise ValueError(f"{name} must be a bool, got {value!r}")
            else:
                raise ValueError(f"unexpected column {name!r}")
        return self

    def to_row(self) -> dict:
        """CSV row: fixed columns, set columns, then label and coverage indicators when labelled."""
        extra = self.model_extra or {}
        row = {"row": self.row, "f_tilde": self.f_tilde, "point": self.point}
        if self.p_tilde is not None:
            row["p_tilde"] = self.p_tilde
        row.update({k: v for k, v in extra.items() if k.startswith(SET_PREFIX)})
        if self.label is not None:
            row["label"] = self.label
            row.update({k: v for k, v in extra.items() if k.startswith(COVERED_PREFIX)})
        return row
