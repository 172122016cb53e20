"""
Posterior predictive sampling, prediction sets and point predictions, plus
the plugin maximum likelihood machinery for a fixed test feature vector.

Posterior samples are (n_post, 3) arrays of (delta, gamma, sigma) for
continuous labels and (n_post, 2) arrays of (delta, gamma) for binary labels,
on the natural scale.
"""
import logging
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DataError, DomainError
from .schemas import GaussianParams, PredictionSet, PredictiveDraws, ResponseKind
from .stats_core import Rng, expit, gaussian_logpdf, gaussian_quantile, standard_cauchy_sample

logger = logging.getLogger(__name__)

# numpy's default ("linear", Hyndman-Fan type 7): the q-quantile of sorted
# draws x_1..x_N sits at 1-based position h = (N - 1) q + 1, interpolated
# linearly between x_floor(h) and x_ceil(h).
QUANTILE_METHOD = "linear"

_STANDARD_NORMAL = GaussianParams()


def _check_posterior(posterior_sample: np.ndarray, min_cols: int) -> np.ndarray:
    sample = np.atleast_2d(np.asarray(posterior_sample, dtype=float))
    if sample.shape[0] == 0 or sample.size == 0:
        raise DataError("empty posterior sample")
    if sample.shape[1] < min_cols:
        raise DataError(f"posterior sample needs {min_cols} columns, got {sample.shape[1]}")
    if np.any(sample[:, 1] <= 0.0):
        raise DomainError("posterior gamma entries must be positive")
    return sample


# posterior rows are filled in blocks of at most this many label draws
PREDICTIVE_CHUNK_DRAWS = 1 << 22


def predictive_draw_count(
    n_post: int,
    n_beta: int,
    n_y: int,
    response_kind: ResponseKind = "continuous",
    rao_blackwellize: bool = True,
) -> int:
    """Number of predictive values stored per test point."""
    if min(n_post, n_beta, n_y) < 1:
        raise DomainError(f"draw counts must be positive, got n_post={n_post}, n_beta={n_beta}, n_y={n_y}")
    if response_kind == "binary" and rao_blackwellize:
        return n_post * n_beta
    return n_post * n_beta * n_y


def predict_continuous(
    posterior_sample: np.ndarray,
    f_tilde: float,
    n_beta: int,
    n_y: int,
    rng: Rng,
) -> PredictiveDraws:
    """
    Posterior predictive label draws for one test point.

    For each posterior (delta, gamma, sigma): n_beta draws beta ~ Cauchy(delta, gamma),
    then for each beta n_y draws Y ~ N(beta * f_tilde, sigma^2). The result holds
    n_post * n_beta * n_y values ordered by (posterior draw, beta draw, label draw).
    Label noise is written in place, a block of posterior rows at a time.
    """
    sample = _check_posterior(posterior_sample, 3)
    if np.any(sample[:, 2] <= 0.0):
        raise DomainError("posterior sigma entries must be positive")
    n_post = sample.shape[0]
    delta, gamma, sigma = sample[:, 0:1], sample[:, 1:2], sample[:, 2]

    beta = delta + gamma * standard_cauchy_sample(rng, (n_post, n_beta))
    values = np.empty((n_post, n_beta, n_y))
    rows_per_chunk = max(1, PREDICTIVE_CHUNK_DRAWS // (n_beta * n_y))
    for start in range(0, n_post, rows_per_chunk):
        stop = min(start + rows_per_chunk, n_post)
        block = values[start:stop]
        rng.standard_normal(out=block)
        block *= sigma[start:stop, None, None]
        block += (beta[start:stop] * f_tilde)[:, :, None]
    return PredictiveDraws(
        values=values.reshape(-1),
        response_kind="continuous",
        n_post=n_post,
        n_beta=n_beta,
        n_y=n_y,
    )


def predict_binary(
    posterior_sample: np.ndarray,
    f_tilde: float,
    n_beta: int,
    rng: Rng,
    n_y: int = 1,
    rao_blackwellize: bool = True,
) -> PredictiveDraws:
    """
    Posterior predictive for a binary label at one test point.

    Rao-Blackwellized (default): stores expit(beta * f_tilde) for each of the
    n_post * n_beta beta draws, so p_tilde is their mean. Otherwise n_y Bernoulli
    labels are drawn per beta, as the literal triple loop does.
    """
    sample = _check_posterior(posterior_sample, 2)
    n_post = sample.shape[0]
    beta = sample[:, 0:1] + sample[:, 1:2] * standard_cauchy_sample(rng, (n_post, n_beta))
    prob = expit(beta * f_tilde)
    if rao_blackwellize:
        return PredictiveDraws(
            values=prob.ravel(),
            response_kind="binary",
            n_post=n_post,
            n_beta=n_beta,
            n_y=1,
            rao_blackwellized=True,
        )
    labels = (rng.random((n_post, n_beta, n_y)) < prob[:, :, None]).astype(float)
    return PredictiveDraws(
        values=labels.ravel(),
        response_kind="binary",
        n_post=n_post,
        n_beta=n_beta,
        n_y=n_y,
        rao_blackwellized=False,
    )


def interval_from_draws(draws: Union[PredictiveDraws, np.ndarray], alpha: float) -> PredictionSet:
    """Equal-tailed interval between the alpha/2 and 1 - alpha/2 empirical quantiles."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    values = draws.values if isinstance(draws, PredictiveDraws) else np.asarray(draws, dtype=float)
    if values.size == 0:
        raise DataError("cannot build an interval from zero draws")
    lo, hi = np.quantile(values, [alpha / 2.0, 1.0 - alpha / 2.0], method=QUANTILE_METHOD)
    return PredictionSet(kind="interval", nominal_level=1.0 - alpha, interval=(float(lo), float(max(hi, lo))))


def intervals_from_draws(draws: Union[PredictiveDraws, np.ndarray], alphas: Sequence[float]) -> Dict[float, PredictionSet]:
    """interval_from_draws at several levels from a single partial sort of the draws."""
    values = draws.values if isinstance(draws, PredictiveDraws) else np.asarray(draws, dtype=float)
    if values.size == 0:
        raise DataError("cannot build an interval from zero draws")
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {a}")
    probs = [q for a in alphas for q in (a / 2.0, 1.0 - a / 2.0)]
    quantiles = np.quantile(values, probs, method=QUANTILE_METHOD)
    return {
        a: PredictionSet(
            kind="interval",
            nominal_level=1.0 - a,
            interval=(float(quantiles[2 * i]), float(max(quantiles[2 * i + 1], quantiles[2 * i]))),
        )
        for i, a in enumerate(alphas)
    }


def binary_prediction_set(p_tilde: float, alpha: float) -> PredictionSet:
    """
    {0} if p < 1 - p and 1 - alpha <= 1 - p;
    {1} if p > 1 - p and 1 - alpha <= p;
    {0, 1} otherwise.
    """
    if not 0.0 <= p_tilde <= 1.0:
        raise DomainError(f"p_tilde must lie in [0, 1], got {p_tilde}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    q = 1.0 - p_tilde
    level = 1.0 - alpha
    if p_tilde < q and level <= q:
        labels = (0,)
    elif p_tilde > q and level <= p_tilde:
        labels = (1,)
    else:
        labels = (0, 1)
    return PredictionSet(kind="label_set", nominal_level=level, labels=labels)


def point_prediction(draws: Union[PredictiveDraws, np.ndarray], response_kind: Optional[ResponseKind] = None) -> float:
    """Predictive median for continuous labels; p_tilde for binary labels."""
    if isinstance(draws, PredictiveDraws):
        response_kind = response_kind or draws.response_kind
        values = draws.values
    else:
        values = np.asarray(draws, dtype=float)
    if values.size == 0:
        raise DataError("cannot predict from zero draws")
    if response_kind == "binary":
        return float(np.mean(values))
    return float(np.median(values))


# ---------------------------------------------------------------------------
# Plugin maximum likelihood at a fixed test point
# ---------------------------------------------------------------------------

def joint_log_likelihood(
    delta: float,
    gamma: float,
    y: np.ndarray,
    v: np.ndarray,
    s: float,
    sigma: float = 1.0,
) -> float:
    """
    Joint log likelihood of (delta, gamma) given labels y and latent standard
    Cauchy variables v, where beta_i = delta + gamma v_i and s = x^T theta_S:

        sum_i log N(y_i | (gamma v_i + delta) s, sigma^2) + sum_i log Cauchy(v_i | 0, 1).
    """
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    mean = (gamma * v + delta) * s
    gauss = gaussian_logpdf(GaussianParams(mean=0.0, sd=sigma), y - mean)
    cauchy = -np.log(np.pi) - np.log1p(v * v)
    return float(np.sum(gauss) + np.sum(cauchy))


def mle_delta_gamma(y: Sequence[float], v: Sequence[float], s: float) -> Tuple[float, float]:
    """
    Closed-form maximizers of the joint likelihood:

        gamma = sum (v_i - v_bar)(y_i - y_bar) / (s * sum (v_i - v_bar)^2)
        delta = y_bar / s - v_bar * gamma
    """
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    if y.shape != v.shape or y.ndim != 1 or y.size < 2:
        raise DataError(f"y and v must be matching vectors of length >= 2, got {y.shape} and {v.shape}")
    if s == 0.0:
        raise DomainError("s = x^T theta_S must be nonzero")
    dv = v - v.mean()
    sxx = float(dv @ dv)
    if sxx <= 0.0:
        raise DomainError("degenerate latent sample: v is constant")
    gamma_hat = float(dv @ (y - y.mean())) / (s * sxx)
    delta_hat = float(y.mean()) / s - float(v.mean()) * gamma_hat
    return delta_hat, gamma_hat


def theorem1_interval(
    delta_hat: float,
    gamma_hat: float,
    sigma: float,
    s: float,
    alpha: float,
    rng: Rng,
) -> PredictionSet:
    """
    [Phi^-1(alpha/2) sigma + beta s, Phi^-1(1 - alpha/2) sigma + beta s] with one
    draw beta ~ Cauchy(delta_hat, |gamma_hat|); gamma_hat = 0 gives beta = delta_hat.
    A fresh beta is drawn on every call.
    """
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if s == 0.0:
        raise DomainError("s = x^T theta_S must be nonzero")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    scale = abs(gamma_hat)
    beta = delta_hat if scale == 0.0 else delta_hat + scale * float(standard_cauchy_sample(rng))
    z_lo = float(gaussian_quantile(_STANDARD_NORMAL, alpha / 2.0))
    z_hi = float(gaussian_quantile(_STANDARD_NORMAL, 1.0 - alpha / 2.0))
    center = beta * s
    return PredictionSet(kind="interval", nominal_level=1.0 - alpha, interval=(z_lo * sigma + center, z_hi * sigma + center))
