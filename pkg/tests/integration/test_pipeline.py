"""
Calibration pipeline end to end: fit a source model, sample the posterior on
a small target set, and predict on held-out rows.
"""
import logging

import numpy as np
import pytest

from recast.errors import DataError
from recast.pipeline import RecastModel
from recast.schemas import PredictiveConfig, QuadratureConfig
from recast.source_models import fit_source
from recast.stats_core import make_rng
from simulation.metrics import auc, empirical_coverage, rmse
from simulation.scenarios import gen_data

logger = logging.getLogger(__name__)

VOIGT = QuadratureConfig(method="voigt")
PREDICTIVE = PredictiveConfig(n_beta=40, n_y=40, alphas=[0.05, 0.5])


@pytest.mark.integration
def test_continuous_calibration_recovers_scale_shift(continuous_source, continuous_target, theta_small, fast_mcmc):
    logger.info("\n" + "=" * 80)
    logger.info("Continuous calibration: target coefficients are 1.2 x source")
    logger.info("=" * 80)

    source = fit_source("linear", continuous_source)
    model = RecastModel(source, VOIGT, mcmc=fast_mcmc, predictive=PREDICTIVE)
    sample = model.calibrate(continuous_target, make_rng(1))
    assert sample.shape == (fast_mcmc.n_post, 3)
    assert np.all(sample[:, 1] > 0.0) and np.all(sample[:, 2] > 0.0)
    delta_mean = float(sample[:, 0].mean())
    logger.info(f"[Test] posterior mean delta {delta_mean:.3f}, acceptance {model.chain.accept_rate:.3f}")
    assert abs(delta_mean - 1.2) < 0.2

    test = gen_data(1.2 * theta_small, 100, "continuous", make_rng(14))
    predictions = model.predict(test.dataset.X, make_rng(2))
    assert [p.row for p in predictions] == list(range(100))
    points = np.array([p.point for p in predictions])
    logger.info(f"[Test] RMSE vs labels {rmse(points, test.dataset.y):.3f}")
    assert rmse(points, test.mean) < 1.0

    coverage = empirical_coverage([p.sets for p in predictions], test.dataset.y, [0.5, 0.95])
    logger.info(f"[Test] empirical coverage {coverage}")
    assert coverage[0.95] >= 0.85
    assert coverage[0.5] <= coverage[0.95]


@pytest.mark.integration
def test_binary_calibration_and_label_sets(binary_source, binary_target, fast_mcmc):
    source = fit_source("logistic", binary_source)
    model = RecastModel(source, mcmc=fast_mcmc, predictive=PredictiveConfig(n_beta=50, alphas=[0.05, 0.3]))
    sample = model.calibrate(binary_target, make_rng(3))
    assert sample.shape == (fast_mcmc.n_post, 2)

    test = gen_data(np.array([0.1, -1.0, 0.6, 1.2]), 200, "binary", make_rng(23)).dataset
    predictions = model.predict(test.X, make_rng(4))
    p_tilde = np.array([p.p_tilde for p in predictions])
    assert np.all((p_tilde > 0.0) & (p_tilde < 1.0))
    assert all(p.sets[0.05].kind == "label_set" for p in predictions)
    score = auc(p_tilde, test.y)
    logger.info(f"[Test] binary AUC {score:.3f}")
    assert score > 0.7


@pytest.mark.integration
def test_calibration_is_reproducible(continuous_source, continuous_target, fast_mcmc):
    source = fit_source("linear", continuous_source)
    first = RecastModel(source, VOIGT, mcmc=fast_mcmc).calibrate(continuous_target, make_rng(5))
    second = RecastModel(source, VOIGT, mcmc=fast_mcmc).calibrate(continuous_target, make_rng(5))
    assert np.array_equal(first, second)


@pytest.mark.integration
@pytest.mark.slow
def test_adaptive_and_closed_form_posteriors_agree(continuous_source, continuous_target, fast_mcmc):
    """Same stream, same chain: the two continuous integral evaluations differ only by quadrature error."""
    source = fit_source("linear", continuous_source)
    adaptive = RecastModel(source, QuadratureConfig(), mcmc=fast_mcmc).calibrate(continuous_target, make_rng(6))
    closed = RecastModel(source, VOIGT, mcmc=fast_mcmc).calibrate(continuous_target, make_rng(6))
    assert abs(adaptive[:, 0].mean() - closed[:, 0].mean()) < 0.05


@pytest.mark.integration
def test_prediction_needs_a_posterior(continuous_source):
    model = RecastModel(fit_source("linear", continuous_source))
    with pytest.raises(DataError, match="not calibrated"):
        model.predict(continuous_source.X[:2], make_rng(7))
    with pytest.raises(DataError):
        model.use_posterior_sample(np.ones((4, 2)))
    model.use_posterior_sample(np.array([[1.0, 0.1, 1.0]]))
    assert len(model.predict(continuous_source.X[:3], make_rng(8))) == 3


@pytest.mark.integration
def test_response_kind_mismatch(continuous_source, binary_target, fast_mcmc):
    model = RecastModel(fit_source("linear", continuous_source), mcmc=fast_mcmc)
    with pytest.raises(DataError, match="response kinds differ"):
        model.calibrate(binary_target, make_rng(9))
