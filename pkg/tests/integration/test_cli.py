"""
Command-line workflow: fit-source -> calibrate -> predict, the replicate
grid, diagnostics, and exit codes.
"""
import json
import logging
from pathlib import Path

import polars as pl
import pytest

from cli.main import build_parser, main
from recast.model_io import CHAIN_COLUMNS, POSTERIOR_COLUMNS
from recast.stats_core import make_rng
from simulation.scenarios import gen_data

logger = logging.getLogger(__name__)

FAST_TOML = """
seed = 5

[mcmc]
total_iters = 2000
burn_in = 500
keep_last = 1000
n_post = 50
adapt_interval = 50

[predictive]
n_beta = 20
n_y = 20

[quadrature]
method = "voigt"

[mlp]
hidden = 6
epochs = 30
"""

GRID_TOML = FAST_TOML + """
[grid]
n_targets = [30]
sigma_tl2 = [0.0]
response_kinds = ["continuous"]
replicates = 2
n_source = 120
p = 6
n_test = 40
methods = ["recast_linear", "dnn"]
nominal_levels = [0.5, 0.95]
"""


@pytest.fixture
def workspace(tmp_path, continuous_source, continuous_target, theta_small, csv_writer):
    """Source, target and test CSVs plus a fast run configuration."""
    csv_writer(tmp_path / "source.csv", continuous_source)
    csv_writer(tmp_path / "target.csv", continuous_target)
    test = gen_data(1.2 * theta_small, 25, "continuous", make_rng(15)).dataset
    csv_writer(tmp_path / "test.csv", test)
    (tmp_path / "fast.toml").write_text(FAST_TOML)
    return tmp_path


def _run(args, tmp_path: Path) -> int:
    return main(args + ["--log-dir", str(tmp_path / "logs")])


@pytest.mark.integration
def test_parser_lists_subcommands():
    parser = build_parser()
    args = parser.parse_args(["predict", "--model", "m.json", "--posterior", "p.csv", "--data", "t.csv",
                              "--alpha", "0.05", "--alpha", "0.2", "--out", "o.csv"])
    assert args.alpha == [0.05, 0.2]
    with pytest.raises(SystemExit):
        parser.parse_args(["unknown"])


@pytest.mark.integration
def test_fit_calibrate_predict_without_source_data(workspace):
    logger.info("\n" + "=" * 80)
    logger.info("CLI workflow: fit-source, calibrate, predict")
    logger.info("=" * 80)
    cfg = ["--config", str(workspace / "fast.toml")]

    assert _run(["fit-source", "--data", str(workspace / "source.csv"), "--kind", "linear",
                 "--out", str(workspace / "model" / "source.json")] + cfg, workspace) == 0
    assert (workspace / "model" / "effective_config.json").exists()
    # the calibration site only needs the model container
    (workspace / "source.csv").unlink()

    assert _run(["calibrate", "--model", str(workspace / "model" / "source.json"),
                 "--data", str(workspace / "target.csv"), "--out", str(workspace / "post" / "posterior.csv"),
                 "--chain-out", str(workspace / "post" / "chain.csv")] + cfg, workspace) == 0
    posterior = pl.read_csv(workspace / "post" / "posterior.csv")
    assert tuple(posterior.columns) == POSTERIOR_COLUMNS
    assert posterior.height == 50
    diagnostics = json.loads((workspace / "post" / "posterior.diagnostics.json").read_text())
    assert diagnostics["keep_last"] == 1000 and 0.0 < diagnostics["accept_rate"] <= 1.0
    chain = pl.read_csv(workspace / "post" / "chain.csv")
    assert tuple(chain.columns) == CHAIN_COLUMNS and chain.height == 1000
    assert chain["iteration"][0] == 1001

    assert _run(["predict", "--model", str(workspace / "model" / "source.json"),
                 "--posterior", str(workspace / "post" / "posterior.csv"), "--data", str(workspace / "test.csv"),
                 "--alpha", "0.05", "--alpha", "0.5", "--out", str(workspace / "pred" / "pred.csv")] + cfg,
                workspace) == 0
    pred = pl.read_csv(workspace / "pred" / "pred.csv")
    assert pred.height == 25
    assert {"row", "f_tilde", "point", "set_0.05", "set_0.5", "label", "covered_0.05"} <= set(pred.columns)
    coverage = pl.read_csv(workspace / "pred" / "pred.coverage.csv")
    assert coverage["nominal"].to_list() == pytest.approx([0.95, 0.5])
    assert coverage["empirical"][0] >= coverage["empirical"][1]
    effective = json.loads((workspace / "pred" / "effective_config.json").read_text())
    assert effective["seed"] == 5 and effective["command"]["command"] == "predict"


@pytest.mark.integration
def test_calibration_outputs_are_reproducible(workspace):
    cfg = ["--config", str(workspace / "fast.toml")]
    model = str(workspace / "model.json")
    assert _run(["fit-source", "--data", str(workspace / "source.csv"), "--kind", "linear", "--out", model] + cfg,
                workspace) == 0
    for name in ("a", "b"):
        assert _run(["calibrate", "--model", model, "--data", str(workspace / "target.csv"),
                     "--out", str(workspace / name / "posterior.csv")] + cfg, workspace) == 0
    assert (workspace / "a" / "posterior.csv").read_bytes() == (workspace / "b" / "posterior.csv").read_bytes()
    assert _run(["calibrate", "--model", model, "--data", str(workspace / "target.csv"),
                 "--out", str(workspace / "c" / "posterior.csv"), "--seed", "6"] + cfg, workspace) == 0
    assert (workspace / "a" / "posterior.csv").read_bytes() != (workspace / "c" / "posterior.csv").read_bytes()


@pytest.mark.integration
def test_binary_workflow_with_custom_label_column(tmp_path, binary_source, binary_target, csv_writer, capsys):
    csv_writer(tmp_path / "source.csv", binary_source, label_col="outcome")
    csv_writer(tmp_path / "target.csv", binary_target, label_col="outcome")
    (tmp_path / "fast.toml").write_text(FAST_TOML)
    shared = ["--config", str(tmp_path / "fast.toml"), "--label-col", "outcome"]

    assert _run(["fit-source", "--data", str(tmp_path / "source.csv"), "--kind", "logistic",
                 "--out", str(tmp_path / "m.json")] + shared, tmp_path) == 0
    assert _run(["calibrate", "--model", str(tmp_path / "m.json"), "--data", str(tmp_path / "target.csv"),
                 "--out", str(tmp_path / "post.csv")] + shared, tmp_path) == 0
    assert pl.read_csv(tmp_path / "post.csv")["sigma"].null_count() == 50
    assert _run(["predict", "--model", str(tmp_path / "m.json"), "--posterior", str(tmp_path / "post.csv"),
                 "--data", str(tmp_path / "target.csv"), "--out", str(tmp_path / "pred.csv")] + shared, tmp_path) == 0
    pred = pl.read_csv(tmp_path / "pred.csv")
    assert pred["p_tilde"].is_between(0.0, 1.0).all()
    assert set(pred["set_0.05"].unique().to_list()) <= {"{0}", "{1}", "{0,1}"}

    # a one-class target calibrates with a warning
    pl.read_csv(tmp_path / "target.csv").filter(pl.col("outcome") == 1).write_csv(tmp_path / "ones.csv")
    capsys.readouterr()
    assert _run(["calibrate", "--model", str(tmp_path / "m.json"), "--data", str(tmp_path / "ones.csv"),
                 "--out", str(tmp_path / "ones_post.csv")] + shared, tmp_path) == 0
    assert "single-class" in capsys.readouterr().err


@pytest.mark.integration
def test_replicate_and_diagnostics(tmp_path):
    (tmp_path / "grid.toml").write_text(GRID_TOML)
    out_dir = tmp_path / "run"
    assert _run(["replicate", "--config", str(tmp_path / "grid.toml"), "--out-dir", str(out_dir)], tmp_path) == 0

    results = pl.read_csv(out_dir / "results.csv")
    assert results.height == 4
    assert results["method"].to_list() == ["recast_linear", "dnn", "recast_linear", "dnn"]
    assert {"cov_0.50", "cov_0.95", "rmse", "rmse_mean"} <= set(results.columns)
    assert (out_dir / "results.timings.csv").exists()
    assert (out_dir / "summary.csv").exists()
    assert (out_dir / "effective_config.json").exists()

    assert _run(["diagnostics", str(out_dir / "results.csv"), "--out-dir", str(tmp_path / "diag"),
                 "--level", "0.5", "--level", "0.95"], tmp_path) == 0
    assert (tmp_path / "diag" / "results.summary.csv").exists()
    assert (tmp_path / "diag" / "results.reliability.csv").exists()
    assert "plotly" in (tmp_path / "diag" / "results.reliability.html").read_text()

    assert _run(["diagnostics", str(out_dir / "results.csv"), "--out-dir", str(tmp_path / "dnn"),
                 "--method", "dnn"], tmp_path) == 0
    summary = pl.read_csv(tmp_path / "dnn" / "results.summary.csv")
    assert summary["method"].unique().to_list() == ["dnn"]
    assert _run(["diagnostics", str(out_dir / "results.csv"), "--out-dir", str(tmp_path / "none"),
                 "--response-kind", "binary"], tmp_path) == 3


@pytest.mark.integration
def test_diagnostics_on_chain_dump(workspace):
    cfg = ["--config", str(workspace / "fast.toml")]
    model = str(workspace / "model.json")
    assert _run(["fit-source", "--data", str(workspace / "source.csv"), "--kind", "linear", "--out", model] + cfg,
                workspace) == 0
    assert _run(["calibrate", "--model", model, "--data", str(workspace / "target.csv"),
                 "--out", str(workspace / "posterior.csv"), "--chain-out", str(workspace / "chain.csv")] + cfg,
                workspace) == 0
    assert _run(["diagnostics", str(workspace / "chain.csv")], workspace) == 0
    summary = pl.read_csv(workspace / "chain.summary.csv")
    assert summary["parameter"].to_list() == ["delta", "gamma", "sigma"]


@pytest.mark.integration
def test_exit_codes(workspace, capsys):
    cfg = ["--config", str(workspace / "fast.toml")]
    model = str(workspace / "model.json")

    # data error: label column missing
    assert _run(["fit-source", "--data", str(workspace / "source.csv"), "--kind", "linear", "--out", model,
                 "--label-col", "nope"] + cfg, workspace) == 3
    assert "nope" in capsys.readouterr().err

    # configuration error
    (workspace / "bad.toml").write_text("[mcmc]\ntotal_iters = 10\nburn_in = 5\nkeep_last = 10\n")
    assert _run(["fit-source", "--data", str(workspace / "source.csv"), "--kind", "linear", "--out", model,
                 "--config", str(workspace / "bad.toml")], workspace) == 2

    # I/O error: model container missing
    assert _run(["calibrate", "--model", str(workspace / "absent.json"), "--data", str(workspace / "target.csv"),
                 "--out", str(workspace / "p.csv")] + cfg, workspace) == 5

    # data error: test features do not match the model's
    assert _run(["fit-source", "--data", str(workspace / "source.csv"), "--kind", "linear", "--out", model] + cfg,
                workspace) == 0
    (workspace / "narrow.csv").write_text("x1,y\n0.5,1.0\n-0.3,2.0\n")
    assert _run(["calibrate", "--model", model, "--data", str(workspace / "narrow.csv"),
                 "--out", str(workspace / "p.csv")] + cfg, workspace) == 3

    # mlp needs an explicit label type
    assert _run(["fit-source", "--data", str(workspace / "source.csv"), "--kind", "mlp", "--out", model] + cfg,
                workspace) == 2
