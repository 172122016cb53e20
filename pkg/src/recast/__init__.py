"""
Calibration of pre-trained source models to small target datasets through a
multiplicative Cauchy random effect, with posterior predictive prediction sets.
"""
from .errors import ConfigError, DataError, DomainError, NumericalError, QuadratureError, RecastError
from .pipeline import PointPrediction, RecastModel
from .schemas import (
    Chain,
    Dataset,
    MhConfig,
    MlpConfig,
    PredictionSet,
    PredictiveConfig,
    PriorConfig,
    QuadratureConfig,
    ScoredTarget,
)
from .source_models import SourceModel, fit_source, score, score_matrix

__all__ = [
    "Chain",
    "ConfigError",
    "DataError",
    "Dataset",
    "DomainError",
    "MhConfig",
    "MlpConfig",
    "NumericalError",
    "PointPrediction",
    "PredictionSet",
    "PredictiveConfig",
    "PriorConfig",
    "QuadratureConfig",
    "QuadratureError",
    "RecastError",
    "RecastModel",
    "ScoredTarget",
    "SourceModel",
    "fit_source",
    "score",
    "score_matrix",
]
