"""
Source models the calibration is agnostic to: ordinary least squares,
logistic regression (IRLS), the two-layer network, and the unfreeze-last-layer
baseline, plus per-feature standardization.

Every model exposes a pre-link score: x^T theta for the linear and logistic
models, the final linear activation for the network. Binary scores are logits
so that expit(beta * f) composes on the natural-parameter scale.
"""
import hashlib
import logging
from typing import Dict, List, Literal, Optional

import numpy as np
import pydantic
from pydantic import ConfigDict, Field
from scipy import linalg

from .errors import DataError, NumericalError
from .networks import NetworkTrainer, TwoLayerNet, forward_numpy, torch_generator
from .schemas import Dataset, FitMetadata, MlpConfig, ModelKind, ResponseKind
from .stats_core import Rng, expit, make_rng

logger = logging.getLogger(__name__)

OLS_CONDITION_WARNING = 1e10
LOGISTIC_GRAD_TOL = 1e-8
LOGISTIC_MAX_ITER = 100
SEPARATION_NORM = 1e4


class Standardizer(pydantic.BaseModel):
    """Per-column (mean, sd); columns in ``passthrough`` are left untouched."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    means: np.ndarray
    sds: np.ndarray
    passthrough: List[int] = Field(default_factory=list)

    @property
    def p(self) -> int:
        return int(self.means.shape[0])


class SourceModel(pydantic.BaseModel):
    """A fitted source predictor. Immutable; safe to share for scoring."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: ModelKind
    response_kind: ResponseKind
    params: Dict[str, np.ndarray]
    standardizer: Optional[Standardizer] = None
    feature_names: List[str] = Field(default_factory=list)
    has_intercept: bool = False
    metadata: FitMetadata

    @property
    def p(self) -> int:
        if self.kind == "mlp":
            return int(self.params["W1"].shape[1])
        return int(self.params["theta"].shape[0])


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

def standardize_fit(
    X: np.ndarray,
    has_intercept: bool = False,
    feature_names: Optional[List[str]] = None,
) -> Standardizer:
    """Column means and sample sds (ddof = 1); column 0 passes through when it is the intercept."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError(f"standardization needs a 2-d matrix with at least 2 rows, got shape {X.shape}")
    names = feature_names or [f"x{j}" for j in range(X.shape[1])]
    passthrough = [0] if has_intercept else []

    means = X.mean(axis=0)
    sds = X.std(axis=0, ddof=1)
    for j in passthrough:
        means[j], sds[j] = 0.0, 1.0
    zero = [names[j] for j in range(X.shape[1]) if j not in passthrough and not sds[j] > 0.0]
    if zero:
        raise DataError(f"zero-variance column(s) cannot be standardized: {', '.join(zero)}")
    return Standardizer(means=means, sds=sds, passthrough=passthrough)


def standardize_apply(standardizer: Standardizer, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    if X2.shape[1] != standardizer.p:
        raise DataError(f"expected {standardizer.p} features, got {X2.shape[1]}")
    out = (X2 - standardizer.means) / standardizer.sds
    for j in standardizer.passthrough:
        out[:, j] = X2[:, j]
    return out[0] if single else out


def _prepare(data: Dataset, standardizer: Optional[Standardizer]) -> np.ndarray:
    return data.X if standardizer is None else standardize_apply(standardizer, data.X)


# ---------------------------------------------------------------------------
# Linear and logistic regression
# ---------------------------------------------------------------------------

def fit_ols(data: Dataset, standardizer: Optional[Standardizer] = None) -> SourceModel:
    """Least squares via a QR factorization; rank deficiency is an error."""
    if data.response_kind != "continuous":
        raise DataError("ordinary least squares needs a continuous response")
    X = _prepare(data, standardizer)
    n, p = X.shape
    if n < p:
        raise NumericalError(f"rank deficient design: {n} rows for {p} columns")

    Q, R = np.linalg.qr(X, mode="reduced")
    diag = np.abs(np.diag(R))
    tol = np.finfo(float).eps * max(n, p) * (diag.max() if diag.size else 0.0)
    if diag.size == 0 or np.any(diag <= tol):
        raise NumericalError(f"rank deficient design: {int(np.sum(diag <= tol))} dependent column(s)")
    cond = float(np.linalg.cond(R))
    if cond > OLS_CONDITION_WARNING:
        logger.warning(f"OLS design is ill-conditioned (condition number {cond:.3e})")

    theta = linalg.solve_triangular(R, Q.T @ data.y)
    residuals = data.y - X @ theta
    residual_sd = float(np.sqrt(residuals @ residuals / (n - p))) if n > p else None
    logger.info(f"OLS fit on {n} rows, {p} columns (condition number {cond:.3e})")
    return SourceModel(
        kind="linear",
        response_kind="continuous",
        params={"theta": theta},
        standardizer=standardizer,
        feature_names=list(data.feature_names),
        has_intercept=data.has_intercept,
        metadata=FitMetadata(n_train=n, residual_sd=residual_sd, condition_number=cond),
    )


def fit_logistic(
    data: Dataset,
    standardizer: Optional[Standardizer] = None,
    on_separation: Literal["raise", "warn"] = "raise",
) -> SourceModel:
    """
    Logistic regression by iteratively reweighted least squares (Newton steps).

    Converged when the largest score-gradient component falls below 1e-8;
    stops after 100 iterations. Complete separation (coefficients growing past
    1e4, or a fit that classifies every row with a positive margin) raises
    NumericalError; with on_separation="warn" the last finite iterate is kept
    and flagged in the metadata instead.
    """
    if data.response_kind != "binary":
        raise DataError("logistic regression needs a binary response")
    y = data.y
    if np.all(y == y[0]):
        raise DataError(f"single-class binary data: every label is {int(y[0])}")
    X = _prepare(data, standardizer)
    n, p = X.shape

    theta = np.zeros(p)
    converged = False
    separated = False
    iterations = 0
    for iterations in range(1, LOGISTIC_MAX_ITER + 1):
        prob = expit(X @ theta)
        grad = X.T @ (y - prob)
        if np.max(np.abs(grad)) < LOGISTIC_GRAD_TOL:
            converged = True
            break
        weights = prob * (1.0 - prob)
        hessian = X.T @ (weights[:, None] * X)
        try:
            step = linalg.solve(hessian, grad, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            step = linalg.lstsq(hessian, grad)[0]
        candidate = theta + step
        if not np.all(np.isfinite(candidate)) or np.linalg.norm(candidate) > SEPARATION_NORM:
            message = f"separation: coefficient norm exceeded {SEPARATION_NORM:g} at iteration {iterations}"
            if on_separation == "raise":
                raise NumericalError(message)
            logger.warning(message)
            separated = True
            break
        theta = candidate

    margins = (2.0 * y - 1.0) * (X @ theta)
    if not separated and np.all(margins > 0.0):
        message = "separation: every training row is classified with a positive margin"
        if on_separation == "raise":
            raise NumericalError(message)
        logger.warning(message)
        separated = True
    if not converged and not separated:
        logger.warning(f"IRLS stopped after {LOGISTIC_MAX_ITER} iterations without meeting the gradient tolerance")
    logger.info(f"Logistic fit on {n} rows, {p} columns in {iterations} iteration(s)")
    return SourceModel(
        kind="logistic",
        response_kind="binary",
        params={"theta": theta},
        standardizer=standardizer,
        feature_names=list(data.feature_names),
        has_intercept=data.has_intercept,
        metadata=FitMetadata(n_train=n, iterations=iterations, extra={"separation": separated}),
    )


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------

def _training_rng(cfg: MlpConfig, rng: Optional[Rng]) -> Rng:
    # a passed stream wins; cfg.seed is the fallback for standalone fits
    if rng is not None:
        return rng
    if cfg.seed is None:
        raise ValueError("fit_mlp needs an rng or MlpConfig.seed")
    return make_rng(cfg.seed)


def fit_mlp(
    data: Dataset,
    cfg: Optional[MlpConfig] = None,
    rng: Optional[Rng] = None,
    standardizer: Optional[Standardizer] = None,
) -> SourceModel:
    """Two-layer network with Xavier init, early-stopped on a calibration split."""
    cfg = cfg or MlpConfig()
    rng = _training_rng(cfg, rng)
    X = _prepare(data, standardizer)

    net = TwoLayerNet(X.shape[1], cfg.hidden)
    net.xavier_init(torch_generator(int(rng.integers(0, 2**62))))
    trainer = NetworkTrainer(cfg, data.response_kind)
    net, report = trainer.train(net, X, data.y, rng)
    return SourceModel(
        kind="mlp",
        response_kind=data.response_kind,
        params=net.to_arrays(),
        standardizer=standardizer,
        feature_names=list(data.feature_names),
        has_intercept=data.has_intercept,
        metadata=FitMetadata(n_train=data.n, **report),
    )


def unfreeze_last_layer(
    src: SourceModel,
    target: Dataset,
    cfg: Optional[MlpConfig] = None,
    rng: Optional[Rng] = None,
) -> SourceModel:
    """Retrain only the output layer of a fitted network on target data; layer 1 is left bit-identical."""
    if src.kind != "mlp":
        raise DataError(f"unfreeze_last_layer needs a network source model, got {src.kind}")
    if src.response_kind != target.response_kind:
        raise DataError(f"response kinds differ: source {src.response_kind}, target {target.response_kind}")
    cfg = cfg or MlpConfig()
    rng = _training_rng(cfg, rng)
    X = _prepare(target, src.standardizer)

    net = TwoLayerNet.from_arrays(src.params)
    for param in net.l1.parameters():
        param.requires_grad_(False)
    trainer = NetworkTrainer(cfg, target.response_kind)
    net, report = trainer.train(net, X, target.y, rng, trainable=list(net.l2.parameters()))

    params = net.to_arrays()
    params["W1"], params["b1"] = src.params["W1"].copy(), src.params["b1"].copy()
    return SourceModel(
        kind="mlp",
        response_kind=target.response_kind,
        params=params,
        standardizer=src.standardizer,
        feature_names=list(src.feature_names),
        has_intercept=src.has_intercept,
        metadata=FitMetadata(n_train=target.n, extra={"unfrozen_from_n_train": src.metadata.n_train}, **report),
    )


def network_calibration_loss(model: SourceModel, data: Dataset, rows: Optional[List[int]] = None) -> float:
    """MSE of a network on (a subset of) data, on the same scale training used."""
    if model.kind != "mlp":
        raise DataError("calibration loss is defined for network models only")
    X = _prepare(data, model.standardizer)
    y = data.y
    if rows is not None:
        X, y = X[rows], y[rows]
    trainer = NetworkTrainer(MlpConfig(), model.response_kind)
    return trainer.calibration_loss(TwoLayerNet.from_arrays(model.params), X, y)


def layer_one_digest(model: SourceModel) -> str:
    """SHA-256 of the first-layer parameters."""
    h = hashlib.sha256()
    for name in ("W1", "b1"):
        h.update(np.ascontiguousarray(model.params[name], dtype=np.float64).tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

def score_matrix(model: SourceModel, X: np.ndarray) -> np.ndarray:
    """Pre-link scores for every row of X (raw, unstandardized features)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.p:
        raise DataError(f"dimension mismatch: model expects {model.p} features, got {X.shape[1]}")
    if model.standardizer is not None:
        X = standardize_apply(model.standardizer, X)
    if model.kind == "mlp":
        return forward_numpy(model.params, X)
    return X @ model.params["theta"]


def score(model: SourceModel, x: np.ndarray) -> float:
    """f(theta_S, x) for a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DataError(f"score expects a feature vector, got shape {x.shape}")
    return float(score_matrix(model, x[None, :])[0])


def fit_source(
    kind: ModelKind,
    data: Dataset,
    standardize: bool = True,
    cfg: Optional[MlpConfig] = None,
    rng: Optional[Rng] = None,
) -> SourceModel:
    """Dispatch on model kind, optionally fitting a standardizer first."""
    standardizer = (
        standardize_fit(data.X, data.has_intercept, data.feature_names or None) if standardize else None
    )
    if kind == "linear":
        return fit_ols(data, standardizer)
    if kind == "logistic":
        return fit_logistic(data, standardizer)
    if kind == "mlp":
        return fit_mlp(data, cfg, rng, standardizer)
    raise DataError(f"unknown model kind {kind!r}")
