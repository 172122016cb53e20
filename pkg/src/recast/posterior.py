"""
Log-prior and log-posterior (up to a constant) of the calibration parameters.

Coordinates are (delta, log gamma, log sigma^2) for continuous labels and
(delta, log gamma) for binary labels. The priors are Gaussian in these
coordinates, which is the log-normal prior on gamma and sigma with the
Jacobian of the change of variables included.
"""
import logging
import math
from typing import Optional

import numpy as np

from .errors import DataError, DomainError, NumericalError
from .quadrature import FloorDiagnostics, binary_integrals, continuous_integrals, floored_log
from .schemas import (
    BINARY_PARAM_NAMES,
    CONTINUOUS_PARAM_NAMES,
    BinaryParams,
    ContinuousParams,
    GaussianParams,
    PriorConfig,
    QuadratureConfig,
    ScoredTarget,
)
from .stats_core import gaussian_logpdf

logger = logging.getLogger(__name__)


def _normal_logpdf(x: float, mean: float, var: float) -> float:
    return float(gaussian_logpdf(GaussianParams(mean=mean, sd=math.sqrt(var)), x))


def log_prior_continuous(p: ContinuousParams, hyper: Optional[PriorConfig] = None) -> float:
    """log N(delta | 1, 400) + log N(log gamma | 0, 9) + log N(log sigma^2 | 0, 9) at the defaults."""
    hyper = hyper or PriorConfig()
    return (
        _normal_logpdf(p.delta, hyper.delta_mean, hyper.delta_var)
        + _normal_logpdf(p.log_gamma, hyper.log_gamma_mean, hyper.log_gamma_var)
        + _normal_logpdf(p.log_sigma2, hyper.log_sigma2_mean, hyper.log_sigma2_var)
    )


def log_prior_binary(p: BinaryParams, hyper: Optional[PriorConfig] = None) -> float:
    hyper = hyper or PriorConfig()
    return (
        _normal_logpdf(p.delta, hyper.delta_mean, hyper.delta_var)
        + _normal_logpdf(p.log_gamma, hyper.log_gamma_mean, hyper.log_gamma_var)
    )


def _require_kind(data: ScoredTarget, kind: str) -> None:
    if data.response_kind != kind:
        raise DataError(f"expected {kind} target data, got {data.response_kind}")


def check_nonzero_scores(data: ScoredTarget) -> None:
    """Continuous likelihoods need every source score to be nonzero."""
    rows = data.zero_score_rows()
    if rows:
        shown = ", ".join(str(r) for r in rows[:20])
        more = f" (+{len(rows) - 20} more)" if len(rows) > 20 else ""
        raise DataError(f"zero source score violates a.s. condition at row(s) {shown}{more}")


def log_posterior_continuous(
    p: ContinuousParams,
    data: ScoredTarget,
    cfg: Optional[QuadratureConfig] = None,
    hyper: Optional[PriorConfig] = None,
    diagnostics: Optional[FloorDiagnostics] = None,
) -> float:
    """
    log prior + sum_i log I_i with I_i the marginal likelihood of label i.

    I_i is the substituted integral of the quadrature module, which already
    carries the 1/|f_i| factor, so no separate -sum log|f_i| term is added.
    Terms below the smallest normal double are floored and counted.
    """
    _require_kind(data, "continuous")
    lp = log_prior_continuous(p, hyper)
    if data.n == 0:
        return lp
    check_nonzero_scores(data)
    values = continuous_integrals(data.labels, data.scores, p.delta, p.gamma, p.sigma, cfg)
    return lp + float(np.sum(floored_log(values, diagnostics)))


def log_posterior_binary(
    p: BinaryParams,
    data: ScoredTarget,
    cfg: Optional[QuadratureConfig] = None,
    hyper: Optional[PriorConfig] = None,
    diagnostics: Optional[FloorDiagnostics] = None,
) -> float:
    """log prior + sum_i log P(y_i | f_i, delta, gamma)."""
    _require_kind(data, "binary")
    lp = log_prior_binary(p, hyper)
    if data.n == 0:
        return lp
    values = binary_integrals(data.labels, data.scores, p.delta, p.gamma, cfg)
    return lp + float(np.sum(floored_log(values, diagnostics)))


class LogPosterior:
    """
    Log posterior as a function of the sampling-coordinate vector.

    Evaluations that fail numerically (quadrature budget, gamma or sigma
    overflowing or underflowing) return -inf so a sampler rejects the state;
    the count is kept in ``failed_evaluations``. Data and configuration are never mutated.
    """

    def __init__(
        self,
        data: ScoredTarget,
        quadrature: Optional[QuadratureConfig] = None,
        prior: Optional[PriorConfig] = None,
    ):
        self.data = data
        self.quadrature = quadrature or QuadratureConfig()
        self.prior = prior or PriorConfig()
        self.diagnostics = FloorDiagnostics()
        self.failed_evaluations = 0
        if data.response_kind == "continuous":
            check_nonzero_scores(data)
            self.param_names = CONTINUOUS_PARAM_NAMES
        else:
            self.param_names = BINARY_PARAM_NAMES

        self._logger_prefix = (
            f"{self.__class__.__module__}."
            f"{self.__class__.__name__}"
        )

    def _get_logger(self, method_name: str):
        return logging.getLogger(f"{self._logger_prefix}.{method_name}")

    @property
    def dimension(self) -> int:
        return len(self.param_names)

    @property
    def floor_events(self) -> int:
        return self.diagnostics.floor_events

    def __call__(self, x: np.ndarray) -> float:
        if not np.all(np.isfinite(x)):
            return -np.inf
        try:
            if self.data.response_kind == "continuous":
                value = log_posterior_continuous(
                    ContinuousParams.from_array(x), self.data, self.quadrature, self.prior, self.diagnostics
                )
            else:
                value = log_posterior_binary(
                    BinaryParams.from_array(x), self.data, self.quadrature, self.prior, self.diagnostics
                )
        except (NumericalError, DomainError, OverflowError) as e:
            self.failed_evaluations += 1
            self._get_logger("__call__").debug(f"log posterior evaluation failed at {x}: {e}")
            return -np.inf
        return value if math.isfinite(value) else -np.inf
