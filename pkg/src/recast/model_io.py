"""
On-disk formats for pipeline artifacts.

Source model container: UTF-8 JSON with a magic string and format version,
holding kind, parameters, standardizer and fit metadata (no training data).
Posterior samples and chain dumps are CSV tables written with polars.
See doc/file_formats.md for the column-by-column schemas.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import polars as pl
import pydantic
from pydantic import ConfigDict, Field, ValidationError

from .errors import DataError
from .schemas import Chain, FitMetadata, ModelKind, ResponseKind
from .source_models import SourceModel, Standardizer

logger = logging.getLogger(__name__)

MODEL_MAGIC = "RECAST-SOURCE-MODEL"
MODEL_FORMAT_VERSION = 1

POSTERIOR_COLUMNS = ("delta", "gamma", "sigma")
CHAIN_COLUMNS = ("iteration", "delta", "gamma", "sigma", "log_target")


class ArrayPayload(pydantic.BaseModel):
    shape: List[int]
    data: List[float]

    @classmethod
    def from_array(cls, a: np.ndarray) -> "ArrayPayload":
        a = np.asarray(a, dtype=float)
        return cls(shape=list(a.shape), data=[float(v) for v in a.ravel()])

    def to_array(self) -> np.ndarray:
        return np.asarray(self.data, dtype=float).reshape(self.shape)


class StandardizerPayload(pydantic.BaseModel):
    means: List[float]
    sds: List[float]
    passthrough: List[int] = Field(default_factory=list)


class ModelContainer(pydantic.BaseModel):
    """Serialized form of a SourceModel."""
    model_config = ConfigDict(extra="forbid")

    magic: str
    format_version: int
    kind: ModelKind
    response_kind: ResponseKind
    feature_names: List[str] = Field(default_factory=list)
    has_intercept: bool = False
    params: Dict[str, ArrayPayload]
    standardizer: Optional[StandardizerPayload] = None
    metadata: Dict[str, Any]


def model_to_container(model: SourceModel) -> ModelContainer:
    std = None
    if model.standardizer is not None:
        std = StandardizerPayload(
            means=[float(v) for v in model.standardizer.means],
            sds=[float(v) for v in model.standardizer.sds],
            passthrough=list(model.standardizer.passthrough),
        )
    return ModelContainer(
        magic=MODEL_MAGIC,
        format_version=MODEL_FORMAT_VERSION,
        kind=model.kind,
        response_kind=model.response_kind,
        feature_names=list(model.feature_names),
        has_intercept=model.has_intercept,
        params={name: ArrayPayload.from_array(a) for name, a in sorted(model.params.items())},
        standardizer=std,
        metadata=model.metadata.model_dump(mode="json"),
    )


def container_to_model(container: ModelContainer) -> SourceModel:
    std = None
    if container.standardizer is not None:
        std = Standardizer(
            means=np.asarray(container.standardizer.means, dtype=float),
            sds=np.asarray(container.standardizer.sds, dtype=float),
            passthrough=container.standardizer.passthrough,
        )
    return SourceModel(
        kind=container.kind,
        response_kind=container.response_kind,
        params={name: payload.to_array() for name, payload in container.params.items()},
        standardizer=std,
        feature_names=container.feature_names,
        has_intercept=container.has_intercept,
        metadata=FitMetadata.model_validate(container.metadata),
    )


def save_model(model: SourceModel, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model_to_container(model).model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"Wrote {model.kind} source model to {path}")
    return path


def load_model(path: Path) -> SourceModel:
    """Read a model container; wrong magic or an unsupported version is a DataError."""
    path = Path(path)
    try:
        container = ModelContainer.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise DataError(f"{path} is not a valid source model container: {e.errors()[:3]}") from e
    if container.magic != MODEL_MAGIC:
        raise DataError(f"{path}: bad magic string {container.magic!r}")
    if container.format_version != MODEL_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format version {container.format_version}")
    return container_to_model(container)


# ---------------------------------------------------------------------------
# Posterior samples and chains
# ---------------------------------------------------------------------------

def posterior_frame(sample: np.ndarray, response_kind: ResponseKind) -> pl.DataFrame:
    """Natural-scale posterior sample as a table; sigma is null for binary models."""
    sample = np.asarray(sample, dtype=float)
    columns = {"delta": sample[:, 0], "gamma": sample[:, 1]}
    if response_kind == "continuous":
        columns["sigma"] = sample[:, 2]
    df = pl.DataFrame(columns)
    if response_kind == "binary":
        df = df.with_columns(pl.lit(None, dtype=pl.Float64).alias("sigma"))
    return df.select(POSTERIOR_COLUMNS)


def write_posterior_sample(sample: np.ndarray, response_kind: ResponseKind, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    posterior_frame(sample, response_kind).write_csv(path)
    logger.info(f"Wrote {sample.shape[0]} posterior draws to {path}")
    return path


def read_posterior_sample(path: Path) -> np.ndarray:
    """(n_post, 2) for binary samples (sigma column empty), (n_post, 3) otherwise."""
    path = Path(path)
    try:
        df = pl.read_csv(path)
    except (pl.exceptions.PolarsError, OSError) as e:
        raise DataError(f"cannot read posterior sample {path}: {e}") from e
    missing = [c for c in POSTERIOR_COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"{path}: missing posterior column(s) {missing}")
    if df.is_empty():
        raise DataError(f"{path}: empty posterior sample")
    if df["sigma"].null_count() == df.height:
        return df.select("delta", "gamma").cast(pl.Float64).to_numpy()
    return df.select(POSTERIOR_COLUMNS).cast(pl.Float64).to_numpy()


def chain_frame(chain: Chain) -> pl.DataFrame:
    """Retained states on the natural scale, numbered by 1-based iteration."""
    s = chain.samples
    sigma = np.exp(0.5 * s[:, 2]) if s.shape[1] > 2 else np.full(s.shape[0], np.nan)
    return pl.DataFrame({
        "iteration": np.arange(chain.first_iteration, chain.total_iters + 1, dtype=np.int64),
        "delta": s[:, 0],
        "gamma": np.exp(s[:, 1]),
        "sigma": sigma,
        "log_target": chain.log_target,
    }).select(CHAIN_COLUMNS)


def write_chain_csv(chain: Chain, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    chain_frame(chain).write_csv(path)
    logger.info(f"Wrote chain dump ({chain.keep_last} states) to {path}")
    return path
