"""
Synthetic source/target generation for the simulation study.

Features are standard Gaussian with a leading intercept column. Source and
target coefficients differ by an isotropic Gaussian perturbation whose
variance (sigma_tl2) controls how far the target drifts from the source.
"""
import logging
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config.settings import GridConfig
from recast.schemas import Dataset, ResponseKind
from recast.stats_core import Rng, derive_rng, expit, standard_cauchy_sample

logger = logging.getLogger(__name__)

# source coefficient magnitudes are drawn from Uniform(0.75, 5)
THETA_SOURCE_LOW = 0.75
THETA_SOURCE_HIGH = 5.0
# continuous label noise sd for generated data
NOISE_SD = 1.0


class Scenario(BaseModel):
    """One cell of the experiment grid at one replicate."""
    model_config = ConfigDict(frozen=True)

    response_kind: ResponseKind
    n_target: int = Field(..., ge=1)
    sigma_tl2: float = Field(..., ge=0.0)
    replicate: int = Field(0, ge=0)
    p: int = Field(50, ge=2, description="Number of features including the intercept")
    n_source: int = Field(1000, ge=1)
    n_test: int = Field(250, ge=1)
    seed: int = Field(0, description="Master seed of the experiment suite")

    @property
    def key(self) -> Tuple[str, int, float, int]:
        """(response_kind, n_target, sigma_tl2, replicate), the resume key of a results row."""
        return (self.response_kind, self.n_target, float(self.sigma_tl2), self.replicate)

    def rng(self) -> Rng:
        """Replicate stream, derived from the master seed and the key only."""
        return derive_rng(self.seed, *self.key)


class GeneratedData(NamedTuple):
    dataset: Dataset
    mean: np.ndarray  # noiseless X @ theta


def make_theta_source(rng: Rng, p: int = 50) -> np.ndarray:
    """(-a, b) with every |component| ~ Uniform(0.75, 5); the first p // 2 entries are negative."""
    if p < 2:
        raise ValueError(f"p must be at least 2, got {p}")
    magnitudes = rng.uniform(THETA_SOURCE_LOW, THETA_SOURCE_HIGH, size=p)
    signs = np.where(np.arange(p) < p // 2, -1.0, 1.0)
    return signs * magnitudes


def theta_source_for_suite(master_seed: int, p: int = 50) -> np.ndarray:
    """The suite-wide source coefficients; identical for every scenario sharing the master seed."""
    return make_theta_source(derive_rng(master_seed, "theta_source", p), p)


def make_theta_target(theta_source: np.ndarray, sigma_tl2: float, rng: Rng) -> np.ndarray:
    if sigma_tl2 < 0.0:
        raise ValueError(f"sigma_tl2 must be nonnegative, got {sigma_tl2}")
    theta_source = np.asarray(theta_source, dtype=float)
    if sigma_tl2 == 0.0:
        return theta_source.copy()
    return theta_source + np.sqrt(sigma_tl2) * rng.standard_normal(theta_source.shape[0])


def feature_names(p: int) -> List[str]:
    return ["intercept"] + [f"x{j}" for j in range(1, p)]


def gen_data(theta: np.ndarray, n: int, response_kind: ResponseKind, rng: Rng) -> GeneratedData:
    """
    X = [1 | N(0, I) block]; continuous y = X theta + N(0, 1) noise,
    binary y ~ Bernoulli(expit(X theta)).
    """
    theta = np.asarray(theta, dtype=float)
    p = theta.shape[0]
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    mean = X @ theta
    if response_kind == "continuous":
        y = mean + NOISE_SD * rng.standard_normal(n)
    else:
        y = (rng.random(n) < expit(mean)).astype(float)
    dataset = Dataset(X=X, y=y, response_kind=response_kind, feature_names=feature_names(p), has_intercept=True)
    return GeneratedData(dataset=dataset, mean=mean)


# ---------------------------------------------------------------------------
# Repeated labels at a single feature vector
# ---------------------------------------------------------------------------

def simulate_fixed_feature_target(
    x_tilde: np.ndarray,
    theta_target: np.ndarray,
    sigma: float,
    n: int,
    rng: Rng,
) -> np.ndarray:
    """n iid labels N(x_tilde^T theta_target, sigma^2) at one feature vector."""
    mean = float(np.asarray(x_tilde, dtype=float) @ np.asarray(theta_target, dtype=float))
    return mean + sigma * rng.standard_normal(n)


def draw_latent_cauchy(n: int, rng: Rng) -> np.ndarray:
    """Standard Cauchy latents v_i, so that beta_i = delta + gamma v_i."""
    return np.asarray(standard_cauchy_sample(rng, n), dtype=float)


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

def enumerate_scenarios(grid: GridConfig, master_seed: int, replicates: Optional[int] = None) -> List[Scenario]:
    """Every (response kind, n_target, sigma_tl2, replicate) cell of the grid, in that nesting order."""
    replicates = grid.replicates if replicates is None else replicates
    scenarios = [
        Scenario(
            response_kind=kind,
            n_target=n_target,
            sigma_tl2=sigma_tl2,
            replicate=rep,
            p=grid.p,
            n_source=grid.n_source,
            n_test=grid.n_test,
            seed=master_seed,
        )
        for kind in grid.response_kinds
        for n_target in grid.n_targets
        for sigma_tl2 in grid.sigma_tl2
        for rep in range(replicates)
    ]
    logger.info(
        f"Enumerated {len(scenarios)} scenario replicates "
        f"({len(scenarios) // max(replicates, 1)} combinations x {replicates} replicates)"
    )
    return scenarios
