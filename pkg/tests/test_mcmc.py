import logging

import numpy as np
import pytest
from scipy import stats

from recast.errors import DataError, NumericalError
from recast.mcmc import posterior_sample_from_chain, run_rwmh, thin_chain, thin_indices, to_natural_scale
from recast.schemas import MhConfig
from recast.stats_core import make_rng

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)


class GaussianTarget:
    """Standard Gaussian log density in `dimension` coordinates."""

    def __init__(self, dimension: int):
        self.dimension = dimension
        self.param_names = tuple(f"z{j}" for j in range(dimension))

    def __call__(self, x: np.ndarray) -> float:
        return float(-0.5 * np.sum(x ** 2))


def _cauchy_log_density(x: np.ndarray) -> float:
    return float(-np.log1p(x[0] ** 2))


@pytest.mark.unit
def test_mh_config_schedule_is_validated():
    with pytest.raises(ValueError):
        MhConfig(total_iters=100, burn_in=60, keep_last=50)
    with pytest.raises(ValueError):
        MhConfig(total_iters=100, burn_in=10, keep_last=50, n_post=60)


@pytest.mark.unit
def test_bivariate_gaussian_moments():
    cfg = MhConfig(total_iters=60_000, burn_in=10_000, keep_last=50_000, n_post=300, init=[3.0, -3.0], seed=8)
    chain = run_rwmh(GaussianTarget(2), cfg)
    means, variances = chain.samples.mean(axis=0), chain.samples.var(axis=0)
    logger.info(f"[Test] means {means}, variances {variances}, acceptance {chain.accept_rate:.3f}")
    assert np.all(np.abs(means) < 0.05)
    assert np.all(np.abs(variances - 1.0) < 0.1)
    assert chain.param_names == ("z0", "z1")
    assert 0.15 < chain.accept_rate < 0.6


@pytest.mark.unit
def test_cauchy_target_median():
    cfg = MhConfig(total_iters=60_000, burn_in=10_000, keep_last=50_000, init=[0.0], seed=9)
    chain = run_rwmh(_cauchy_log_density, cfg)
    assert abs(np.median(chain.samples[:, 0])) < 0.1


@pytest.mark.unit
def test_same_seed_gives_identical_chains():
    cfg = MhConfig(total_iters=2_000, burn_in=500, keep_last=1_000, n_post=100, seed=17)
    first = run_rwmh(GaussianTarget(3), cfg)
    second = run_rwmh(GaussianTarget(3), cfg)
    assert np.array_equal(first.samples, second.samples)
    assert np.array_equal(first.proposal_sds, second.proposal_sds)

    third = run_rwmh(GaussianTarget(3), cfg.model_copy(update={"seed": 18}))
    assert not np.array_equal(first.samples, third.samples)


@pytest.mark.unit
def test_rng_argument_used_without_config_seed():
    cfg = MhConfig(total_iters=500, burn_in=100, keep_last=300, n_post=10)
    a = run_rwmh(GaussianTarget(1), cfg, make_rng(4))
    b = run_rwmh(GaussianTarget(1), cfg, make_rng(4))
    assert np.array_equal(a.samples, b.samples)
    with pytest.raises(ValueError):
        run_rwmh(GaussianTarget(1), cfg)


@pytest.mark.unit
def test_passed_rng_overrides_config_seed():
    # replicate streams must stay independent even when a run config pins mcmc.seed
    cfg = MhConfig(total_iters=400, burn_in=200, keep_last=200, n_post=10, seed=7)
    first = run_rwmh(GaussianTarget(3), cfg, make_rng(1))
    second = run_rwmh(GaussianTarget(3), cfg, make_rng(2))
    assert not np.array_equal(first.samples, second.samples)
    np.testing.assert_array_equal(first.samples, run_rwmh(GaussianTarget(3), cfg, make_rng(1)).samples)
    np.testing.assert_array_equal(run_rwmh(GaussianTarget(3), cfg).samples, run_rwmh(GaussianTarget(3), cfg, make_rng(7)).samples)


@pytest.mark.unit
def test_proposal_sds_adapt_only_during_burn_in():
    cfg = MhConfig(total_iters=3_000, burn_in=1_000, keep_last=2_000, n_post=10, init_proposal_sd=20.0, seed=2)
    chain = run_rwmh(GaussianTarget(2), cfg)
    # a 20-sd proposal is far too wide for a unit Gaussian; adaptation must shrink it
    assert np.all(chain.proposal_sds < 20.0)
    assert chain.keep_last == 2_000
    assert chain.first_iteration == 1_001


@pytest.mark.unit
def test_non_finite_initial_state_is_an_error():
    cfg = MhConfig(total_iters=10, burn_in=0, keep_last=10, n_post=1, init=[0.0], seed=1)
    with pytest.raises(NumericalError, match="initial state"):
        run_rwmh(lambda x: -np.inf, cfg)


@pytest.mark.unit
def test_all_rejections_are_flagged():
    def spike(x: np.ndarray) -> float:
        return 0.0 if x[0] == 0.0 else -np.inf

    cfg = MhConfig(total_iters=200, burn_in=100, keep_last=100, n_post=5, init=[0.0], seed=3)
    chain = run_rwmh(spike, cfg)
    assert chain.accept_rate == 0.0
    assert chain.high_rejection
    assert np.all(chain.samples == 0.0)


@pytest.mark.unit
def test_thin_indices_rule():
    idx = thin_indices(50_000, 300)
    assert idx[0] == 165 and idx[1] == 331
    assert idx[-1] == 300 * 166 - 1
    np.testing.assert_array_equal(thin_indices(7, 7), np.arange(7))
    np.testing.assert_array_equal(thin_indices(10, 1), [9])
    with pytest.raises(DataError):
        thin_indices(10, 11)
    with pytest.raises(DataError):
        thin_indices(10, 0)


@pytest.mark.unit
def test_thinned_sample_on_natural_scale():
    cfg = MhConfig(total_iters=400, burn_in=100, keep_last=300, n_post=30, seed=6)
    chain = run_rwmh(GaussianTarget(3), cfg)
    thinned = thin_chain(chain, 30)
    natural = posterior_sample_from_chain(chain, 30)
    assert natural.shape == (30, 3)
    np.testing.assert_array_equal(natural[:, 0], thinned[:, 0])
    np.testing.assert_allclose(natural[:, 1], np.exp(thinned[:, 1]))
    np.testing.assert_allclose(natural[:, 2], np.exp(0.5 * thinned[:, 2]))
    assert to_natural_scale(np.array([0.5, 0.0])).shape == (1, 2)


@pytest.mark.slow
def test_gaussian_marginal_passes_ks():
    cfg = MhConfig(total_iters=70_000, burn_in=20_000, keep_last=50_000, init=[0.0], seed=21)
    chain = run_rwmh(GaussianTarget(1), cfg)
    # thin to weaken autocorrelation before the KS comparison
    draws = chain.samples[thin_indices(chain.keep_last, 2_500), 0]
    result = stats.kstest(draws, "norm")
    logger.info(f"[Test] KS p-value {result.pvalue:.4f}")
    assert result.pvalue > 0.01
