import pytest
import numpy as np
from pathlib import Path

from config.settings import GridConfig, RunConfig
from recast.schemas import Dataset, MhConfig, MlpConfig, PredictiveConfig, QuadratureConfig
from recast.stats_core import make_rng
from simulation.scenarios import gen_data, make_theta_source
from utils.loggings import setup_logging


def pytest_configure(config):
    """Setup logging for the entire pytest session."""
    setup_logging(mode="test", log_name="pytest_session")


@pytest.fixture(scope="function", autouse=True)
def initialize_logging(request):
    """Setup logging for integration tests with specific filenames."""
    # Check if 'integration' marker is present
    if "integration" in request.node.keywords:
        test_file_name = Path(request.node.fspath).stem
        setup_logging(mode="test", log_name=test_file_name)


@pytest.fixture
def rng():
    return make_rng(20230101)


@pytest.fixture
def theta_small():
    """Source coefficients for a 6-feature problem (intercept included)."""
    return make_theta_source(make_rng(7), p=6)


@pytest.fixture
def continuous_source(theta_small):
    return gen_data(theta_small, 300, "continuous", make_rng(11)).dataset


@pytest.fixture
def continuous_target(theta_small):
    return gen_data(1.2 * theta_small, 60, "continuous", make_rng(12)).dataset


@pytest.fixture
def binary_source():
    # modest coefficients so the source data are not separable
    theta = np.array([0.2, -0.8, 0.5, 1.0])
    return gen_data(theta, 400, "binary", make_rng(21)).dataset


@pytest.fixture
def binary_target():
    theta = np.array([0.1, -1.0, 0.6, 1.2])
    return gen_data(theta, 80, "binary", make_rng(22)).dataset


@pytest.fixture
def fast_mcmc():
    return MhConfig(total_iters=3000, burn_in=1000, keep_last=1500, n_post=100, adapt_interval=50)


@pytest.fixture
def fast_config(fast_mcmc):
    """Small run configuration: short chains, few predictive draws, tiny networks and grid."""
    return RunConfig(
        quadrature=QuadratureConfig(method="voigt"),
        mcmc=fast_mcmc,
        predictive=PredictiveConfig(n_beta=20, n_y=20),
        mlp=MlpConfig(hidden=8, epochs=60),
        grid=GridConfig(
            n_targets=[30],
            sigma_tl2=[0.0, 1.0],
            response_kinds=["continuous"],
            replicates=2,
            n_source=120,
            p=6,
            n_test=40,
            nominal_levels=[0.5, 0.8, 0.95],
        ),
        seed=99,
    )


def write_csv(path: Path, data: Dataset, label_col: str = "y", drop_intercept: bool = True) -> Path:
    """Write a Dataset as a CSV with a header; the intercept column is left out by default."""
    import polars as pl

    start = 1 if (drop_intercept and data.has_intercept) else 0
    names = data.feature_names[start:] if data.feature_names else [f"x{j}" for j in range(start, data.p)]
    columns = {name: data.X[:, start + j] for j, name in enumerate(names)}
    columns[label_col] = data.y
    pl.DataFrame(columns).write_csv(path)
    return path


@pytest.fixture
def csv_writer():
    return write_csv
