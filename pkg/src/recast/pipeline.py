"""
End-to-end calibration of a source model to target data: score the target,
sample the calibration posterior, thin it, and predict at new feature vectors.
"""
import logging
from typing import Dict, List, Optional

import numpy as np
import pydantic
from pydantic import ConfigDict

from .errors import DataError
from .mcmc import posterior_sample_from_chain, run_rwmh
from .posterior import LogPosterior
from .predictive import (
    binary_prediction_set,
    intervals_from_draws,
    point_prediction,
    predict_binary,
    predict_continuous,
)
from .schemas import (
    Chain,
    Dataset,
    MhConfig,
    PredictionSet,
    PredictiveConfig,
    PriorConfig,
    QuadratureConfig,
    ScoredTarget,
)
from .source_models import SourceModel, score_matrix
from .stats_core import Rng, split_rng

logger = logging.getLogger(__name__)


class PointPrediction(pydantic.BaseModel):
    """Predictive summary for one test row."""
    model_config = ConfigDict(frozen=True)

    row: int
    f_tilde: float
    point: float
    p_tilde: Optional[float] = None
    sets: Dict[float, PredictionSet]


class RecastModel:
    """
    A source model plus the configuration needed to calibrate and predict.

    Usage:
        model = RecastModel(source)
        model.calibrate(target, rng)
        rows = model.predict(X_test, rng)
    """

    def __init__(
        self,
        source: SourceModel,
        quadrature: Optional[QuadratureConfig] = None,
        prior: Optional[PriorConfig] = None,
        mcmc: Optional[MhConfig] = None,
        predictive: Optional[PredictiveConfig] = None,
    ):
        self.source = source
        self.response_kind = source.response_kind
        self.quadrature = quadrature or QuadratureConfig()
        self.prior = prior or PriorConfig()
        self.mcmc = mcmc or MhConfig()
        self.predictive = predictive or PredictiveConfig()

        self.chain: Optional[Chain] = None
        self.posterior_sample: Optional[np.ndarray] = None

        self._logger_prefix = (
            f"{self.__class__.__module__}."
            f"{self.__class__.__name__}"
        )

    def _get_logger(self, method_name: str):
        return logging.getLogger(f"{self._logger_prefix}.{method_name}")

    def score_target(self, target: Dataset) -> ScoredTarget:
        if target.response_kind != self.response_kind:
            raise DataError(
                f"response kinds differ: source model is {self.response_kind}, target data is {target.response_kind}"
            )
        return ScoredTarget(
            scores=score_matrix(self.source, target.X),
            labels=target.y,
            response_kind=target.response_kind,
        )

    def calibrate(self, target: Dataset, rng: Rng) -> np.ndarray:
        """Run the sampler on the target data and keep the thinned natural-scale posterior sample."""
        logger = self._get_logger("calibrate")
        scored = self.score_target(target)
        logger.info(f"Calibrating {self.source.kind} source model on {scored.n} target rows ({self.response_kind})")
        log_target = LogPosterior(scored, self.quadrature, self.prior)
        self.chain = run_rwmh(log_target, self.mcmc, rng)
        self.posterior_sample = posterior_sample_from_chain(self.chain, self.mcmc.n_post)
        if log_target.failed_evaluations:
            logger.warning(f"{log_target.failed_evaluations} log posterior evaluation(s) failed and were rejected")
        logger.info(
            f"Posterior mean delta {self.posterior_sample[:, 0].mean():.4f}, "
            f"median gamma {np.median(self.posterior_sample[:, 1]):.4f}"
        )
        return self.posterior_sample

    def use_posterior_sample(self, sample: np.ndarray) -> None:
        """Adopt a posterior sample computed elsewhere (e.g. read from disk)."""
        sample = np.atleast_2d(np.asarray(sample, dtype=float))
        expected = 3 if self.response_kind == "continuous" else 2
        if sample.shape[1] != expected:
            raise DataError(f"{self.response_kind} posterior sample needs {expected} columns, got {sample.shape[1]}")
        self.posterior_sample = sample

    def predict_row(self, f_tilde: float, rng: Rng, alphas: Optional[List[float]] = None, row: int = 0) -> PointPrediction:
        if self.posterior_sample is None:
            raise DataError("model is not calibrated; call calibrate() or use_posterior_sample() first")
        alphas = alphas if alphas is not None else list(self.predictive.alphas)
        cfg = self.predictive
        if self.response_kind == "continuous":
            draws = predict_continuous(self.posterior_sample, f_tilde, cfg.n_beta, cfg.n_y, rng)
            sets = intervals_from_draws(draws, alphas)
            return PointPrediction(row=row, f_tilde=f_tilde, point=point_prediction(draws), sets=sets)

        draws = predict_binary(
            self.posterior_sample, f_tilde, cfg.n_beta, rng, n_y=cfg.n_y, rao_blackwellize=cfg.rao_blackwellize
        )
        p_tilde = draws.p_tilde
        sets = {a: binary_prediction_set(p_tilde, a) for a in alphas}
        return PointPrediction(row=row, f_tilde=f_tilde, point=p_tilde, p_tilde=p_tilde, sets=sets)

    def predict(self, X: np.ndarray, rng: Rng, alphas: Optional[List[float]] = None) -> List[PointPrediction]:
        """One prediction per row of X; each row gets its own child stream."""
        scores = score_matrix(self.source, X)
        streams = split_rng(rng, len(scores))
        return [
            self.predict_row(float(f), stream, alphas, row=i)
            for i, (f, stream) in enumerate(zip(scores, streams))
        ]
