import logging

import numpy as np
import pytest

from recast.errors import DataError, NumericalError
from recast.schemas import Dataset, FitMetadata, MlpConfig
from recast.source_models import (
    SourceModel,
    fit_logistic,
    fit_mlp,
    fit_ols,
    fit_source,
    layer_one_digest,
    network_calibration_loss,
    score,
    score_matrix,
    standardize_apply,
    standardize_fit,
    unfreeze_last_layer,
)
from recast.stats_core import expit, make_rng
from simulation.scenarios import gen_data

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

TINY_MLP = MlpConfig(hidden=6, epochs=40, seed=3)


def _hand_network() -> SourceModel:
    params = {
        "W1": np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]),
        "b1": np.array([0.0, 0.0, -1.0]),
        "w2": np.array([1.0, -1.0, 2.0]),
        "b2": np.array([0.5]),
    }
    return SourceModel(kind="mlp", response_kind="continuous", params=params, metadata=FitMetadata(n_train=0))


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

@pytest.mark.unit
def test_standardize_sample_sd_convention():
    X = np.array([[1.0], [2.0], [3.0]])
    out = standardize_apply(standardize_fit(X), X)
    np.testing.assert_allclose(out[:, 0], [-1.0, 0.0, 1.0], atol=1e-12)


@pytest.mark.unit
def test_standardize_moments_and_intercept_passthrough(continuous_source):
    X = continuous_source.X
    std = standardize_fit(X, has_intercept=True)
    out = standardize_apply(std, X)
    np.testing.assert_array_equal(out[:, 0], np.ones(X.shape[0]))
    assert np.all(np.abs(out[:, 1:].mean(axis=0)) < 1e-12)
    assert np.all(np.abs(out[:, 1:].std(axis=0, ddof=1) - 1.0) < 1e-12)
    again = standardize_apply(standardize_fit(out, has_intercept=True), out)
    np.testing.assert_allclose(again, out, atol=1e-12)


@pytest.mark.unit
def test_standardize_zero_variance_names_the_column():
    X = np.array([[1.0, 4.0], [2.0, 4.0], [3.0, 4.0]])
    with pytest.raises(DataError, match="flat"):
        standardize_fit(X, feature_names=["x1", "flat"])


@pytest.mark.unit
def test_standardize_apply_checks_width():
    std = standardize_fit(np.array([[1.0, 2.0], [3.0, 5.0], [0.0, 1.0]]))
    with pytest.raises(DataError):
        standardize_apply(std, np.ones((2, 3)))


# ---------------------------------------------------------------------------
# Least squares
# ---------------------------------------------------------------------------

@pytest.mark.unit
def test_ols_interpolates_identity_design():
    data = Dataset(X=np.eye(2), y=np.array([3.0, 5.0]), response_kind="continuous")
    model = fit_ols(data)
    np.testing.assert_allclose(model.params["theta"], [3.0, 5.0], atol=1e-12)
    assert model.metadata.residual_sd is None


@pytest.mark.unit
def test_ols_recovers_exact_coefficients(rng):
    X = rng.normal(size=(40, 4))
    theta = np.array([1.0, -2.0, 0.5, 3.0])
    model = fit_ols(Dataset(X=X, y=X @ theta, response_kind="continuous"))
    np.testing.assert_allclose(model.params["theta"], theta, atol=1e-10)


@pytest.mark.unit
def test_ols_sampling_error_at_source_scale():
    theta = make_rng(31).uniform(-5.0, 5.0, size=50)
    data = gen_data(theta, 1000, "continuous", make_rng(32)).dataset
    model = fit_ols(data)
    error = np.max(np.abs(model.params["theta"] - theta))
    logger.info(f"[Test] OLS max coefficient error {error:.4f}")
    assert error < 0.2
    assert model.metadata.residual_sd == pytest.approx(1.0, abs=0.1)


@pytest.mark.unit
def test_ols_rank_deficiency_is_an_error(rng):
    x = rng.normal(size=20)
    X = np.column_stack([x, 2.0 * x])
    with pytest.raises(NumericalError, match="rank deficient"):
        fit_ols(Dataset(X=X, y=x, response_kind="continuous"))


@pytest.mark.unit
def test_ols_rejects_binary_response(binary_source):
    with pytest.raises(DataError):
        fit_ols(binary_source)


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------

@pytest.mark.unit
def test_logistic_symmetric_data_has_zero_intercept():
    x = np.array([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])
    y = np.array([0.0, 1.0, 0.0, 1.0, 0.0, 1.0])
    X = np.column_stack([np.ones(12), np.concatenate([x, -x])])
    data = Dataset(X=X, y=np.concatenate([y, 1.0 - y]), response_kind="binary")
    model = fit_logistic(data)
    assert model.params["theta"][0] == pytest.approx(0.0, abs=1e-8)
    assert model.metadata.extra["separation"] is False


@pytest.mark.unit
def test_logistic_recovers_simulated_coefficients():
    theta = make_rng(41).normal(0.0, 0.5, size=10)
    data = gen_data(theta, 1000, "binary", make_rng(42)).dataset
    model = fit_logistic(data)
    error = np.max(np.abs(model.params["theta"] - theta))
    logger.info(f"[Test] logistic max coefficient error {error:.4f} after {model.metadata.iterations} iterations")
    assert error < 0.5


@pytest.mark.unit
def test_logistic_detects_separation():
    data = Dataset(X=np.array([[-1.0], [1.0]]), y=np.array([0.0, 1.0]), response_kind="binary")
    with pytest.raises(NumericalError, match="separation"):
        fit_logistic(data)
    model = fit_logistic(data, on_separation="warn")
    assert model.metadata.extra["separation"] is True
    assert np.all(np.isfinite(model.params["theta"]))


@pytest.mark.unit
def test_logistic_single_class_is_a_data_error():
    data = Dataset(X=np.ones((4, 1)), y=np.ones(4), response_kind="binary")
    with pytest.raises(DataError, match="single-class"):
        fit_logistic(data)


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------

@pytest.mark.unit
def test_network_hand_computed_forward_pass():
    model = _hand_network()
    assert score(model, np.array([1.0, 0.0])) == pytest.approx(1.5)
    assert score(model, np.array([2.0, 1.0])) == pytest.approx(5.5)


@pytest.mark.unit
def test_zero_weight_network_returns_output_bias():
    params = {"W1": np.zeros((4, 3)), "b1": np.zeros(4), "w2": np.zeros(4), "b2": np.array([-0.7])}
    model = SourceModel(kind="mlp", response_kind="binary", params=params, metadata=FitMetadata(n_train=0))
    np.testing.assert_allclose(score_matrix(model, make_rng(0).normal(size=(5, 3))), -0.7)


@pytest.mark.unit
def test_fit_mlp_is_bit_reproducible(continuous_source):
    first = fit_mlp(continuous_source, TINY_MLP)
    second = fit_mlp(continuous_source, TINY_MLP)
    for name in ("W1", "b1", "w2", "b2"):
        assert np.array_equal(first.params[name], second.params[name])
    assert first.metadata.calibration_rows == second.metadata.calibration_rows


@pytest.mark.unit
def test_fit_mlp_passed_rng_overrides_config_seed(continuous_source):
    first = fit_mlp(continuous_source, TINY_MLP, make_rng(1))
    second = fit_mlp(continuous_source, TINY_MLP, make_rng(2))
    assert not np.array_equal(first.params["W1"], second.params["W1"])
    seeded = fit_mlp(continuous_source, TINY_MLP)
    assert np.array_equal(seeded.params["W1"], fit_mlp(continuous_source, TINY_MLP, make_rng(TINY_MLP.seed)).params["W1"])


@pytest.mark.unit
def test_fit_mlp_best_epoch_attains_trace_minimum(continuous_source):
    model = fit_mlp(continuous_source, TINY_MLP)
    trace = model.metadata.calibration_trace
    assert len(trace) == TINY_MLP.epochs + 1
    assert model.metadata.calibration_loss == min(trace)
    assert trace[model.metadata.best_epoch] == min(trace)


@pytest.mark.unit
def test_fit_mlp_needs_a_calibration_split():
    data = Dataset(X=np.ones((5, 2)), y=np.arange(5.0), response_kind="continuous")
    with pytest.raises(DataError, match="calibration split"):
        fit_mlp(data, TINY_MLP)


@pytest.mark.unit
def test_binary_network_scores_are_logits(binary_source):
    model = fit_mlp(binary_source, TINY_MLP)
    probs = expit(score_matrix(model, binary_source.X))
    assert np.all((probs > 0.0) & (probs < 1.0))


@pytest.mark.unit
def test_unfreeze_keeps_first_layer_and_cannot_lose_on_source_data(continuous_source):
    src = fit_mlp(continuous_source, TINY_MLP)
    tuned = unfreeze_last_layer(src, continuous_source, TINY_MLP)
    assert layer_one_digest(tuned) == layer_one_digest(src)
    rows = tuned.metadata.calibration_rows
    assert tuned.metadata.calibration_loss <= network_calibration_loss(src, continuous_source, rows) + 1e-6


@pytest.mark.unit
def test_unfreeze_smallest_target(continuous_source, theta_small):
    src = fit_mlp(continuous_source, TINY_MLP)
    target = gen_data(theta_small, 20, "continuous", make_rng(13)).dataset
    tuned = unfreeze_last_layer(src, target, TINY_MLP)
    assert np.all(np.isfinite(score_matrix(tuned, target.X)))


@pytest.mark.unit
def test_unfreeze_requires_network_source(continuous_source):
    with pytest.raises(DataError):
        unfreeze_last_layer(fit_ols(continuous_source), continuous_source, TINY_MLP)


@pytest.mark.slow
def test_network_learns_linear_map_nearly_as_well_as_ols(theta_small):
    train = gen_data(theta_small, 1000, "continuous", make_rng(51))
    test = gen_data(theta_small, 500, "continuous", make_rng(52))
    ols = fit_source("linear", train.dataset)
    net = fit_source("mlp", train.dataset, cfg=MlpConfig(seed=5))

    def held_out_rmse(model):
        return float(np.sqrt(np.mean((score_matrix(model, test.dataset.X) - test.mean) ** 2)))

    ols_rmse, net_rmse = held_out_rmse(ols), held_out_rmse(net)
    logger.info(f"[Test] held-out RMSE: OLS {ols_rmse:.4f}, network {net_rmse:.4f}")
    assert net_rmse < 2.0 * max(ols_rmse, 0.05)


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

@pytest.mark.unit
def test_linear_score_is_a_dot_product():
    data = Dataset(X=np.eye(2), y=np.array([1.0, 2.0]), response_kind="continuous")
    model = fit_ols(data)
    assert score(model, np.array([3.0, 4.0])) == pytest.approx(11.0)
    with pytest.raises(DataError, match="dimension mismatch"):
        score(model, np.array([1.0, 2.0, 3.0]))


@pytest.mark.unit
def test_fit_source_standardizes_and_scores_raw_features(continuous_source):
    standardized = fit_source("linear", continuous_source)
    raw = fit_source("linear", continuous_source, standardize=False)
    assert standardized.standardizer is not None
    np.testing.assert_allclose(
        score_matrix(standardized, continuous_source.X),
        score_matrix(raw, continuous_source.X),
        atol=1e-9,
    )
