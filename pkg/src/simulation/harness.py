"""
Simulation driver: one replicate generates source, target and test data,
fits every requested method and scores it on the shared test set; the grid
runner fans replicates out over worker processes and funnels their rows
through a single CSV writer.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import polars as pl
import torch

from config.settings import RunConfig
from dataloader.analysis_functions import completed_keys
from dataloader.models import (
    KEY_COLUMNS,
    METHOD_LABELS,
    METHODS,
    RESULT_COLUMNS,
    coverage_column,
)
from recast.errors import RecastError
from recast.pipeline import RecastModel
from recast.predictive import binary_prediction_set
from recast.schemas import PredictionSet
from recast.source_models import SourceModel, fit_logistic, fit_ols, fit_source, score_matrix, unfreeze_last_layer
from recast.stats_core import Rng, expit, split_rng

from .metrics import auc, empirical_coverage, rmse
from .scenarios import GeneratedData, Scenario, gen_data, make_theta_target, theta_source_for_suite

logger = logging.getLogger(__name__)

# one child stream per name, spawned in this order for every replicate
STREAM_NAMES = ["theta_target", "source", "target", "test", "source_fit"] + METHODS

RUNTIME_COLUMN = "runtime_s"


def result_columns(nominal_levels: Sequence[float]) -> List[str]:
    return RESULT_COLUMNS + [coverage_column(lvl) for lvl in nominal_levels]


def _result_schema(nominal_levels: Sequence[float]) -> Dict[str, pl.DataType]:
    schema: Dict[str, pl.DataType] = {
        "response_kind": pl.Utf8,
        "n_target": pl.Int64,
        "sigma_tl2": pl.Float64,
        "replicate": pl.Int64,
        "method": pl.Utf8,
        "method_label": pl.Utf8,
        "status": pl.Utf8,
        "error": pl.Utf8,
        "rmse": pl.Float64,
        "rmse_mean": pl.Float64,
        "auc": pl.Float64,
        "posterior_delta_mean": pl.Float64,
        "accept_rate": pl.Float64,
        "floor_events": pl.Int64,
    }
    schema.update({coverage_column(lvl): pl.Float64 for lvl in nominal_levels})
    return schema


# ---------------------------------------------------------------------------
# One replicate
# ---------------------------------------------------------------------------

class _ReplicateData:
    """Source, target and test draws of one replicate."""

    def __init__(self, scenario: Scenario, theta_source: np.ndarray, streams: Dict[str, Rng]):
        self.theta_source = theta_source
        self.theta_target = make_theta_target(theta_source, scenario.sigma_tl2, streams["theta_target"])
        self.source: GeneratedData = gen_data(theta_source, scenario.n_source, scenario.response_kind, streams["source"])
        self.target: GeneratedData = gen_data(self.theta_target, scenario.n_target, scenario.response_kind, streams["target"])
        self.test: GeneratedData = gen_data(self.theta_target, scenario.n_test, scenario.response_kind, streams["test"])


def _base_row(scenario: Scenario, method: str) -> Dict[str, Any]:
    return {
        "response_kind": scenario.response_kind,
        "n_target": scenario.n_target,
        "sigma_tl2": float(scenario.sigma_tl2),
        "replicate": scenario.replicate,
        "method": method,
        "method_label": METHOD_LABELS[(scenario.response_kind, method)],
        "status": "ok",
        "error": None,
    }


def _score_rows(
    row: Dict[str, Any],
    data: _ReplicateData,
    points: np.ndarray,
    sets: Optional[List[Dict[float, PredictionSet]]],
    nominal_levels: Sequence[float],
) -> None:
    """Fill the metric columns of a row from per-test-row predictions."""
    test = data.test.dataset
    if test.response_kind == "continuous":
        row["rmse"] = rmse(points, test.y)
        row["rmse_mean"] = rmse(points, data.test.mean)
    else:
        row["auc"] = auc(points, test.y)
    if sets is not None:
        coverage = empirical_coverage(sets, test.y, nominal_levels)
        row.update({coverage_column(lvl): cov for lvl, cov in coverage.items()})


def _run_recast(
    source: SourceModel,
    data: _ReplicateData,
    cfg: RunConfig,
    alphas: List[float],
    rng: Rng,
) -> Dict[str, Any]:
    calibrate_rng, predict_rng = split_rng(rng, 2)
    model = RecastModel(source, cfg.quadrature, cfg.prior, cfg.mcmc, cfg.predictive)
    sample = model.calibrate(data.target.dataset, calibrate_rng)
    predictions = model.predict(data.test.dataset.X, predict_rng, alphas)
    return {
        "points": np.array([p.point for p in predictions]),
        "sets": [p.sets for p in predictions],
        "posterior_delta_mean": float(sample[:, 0].mean()),
        "accept_rate": model.chain.accept_rate,
        "floor_events": model.chain.floor_events,
    }


def _baseline_predictions(model: SourceModel, data: _ReplicateData, alphas: List[float]) -> Dict[str, Any]:
    """Network baselines: raw output for continuous labels (no sets); probability and label sets for binary."""
    scores = score_matrix(model, data.test.dataset.X)
    if model.response_kind == "continuous":
        return {"points": scores, "sets": None}
    prob = expit(scores)
    sets = [{a: binary_prediction_set(float(p), a) for a in alphas} for p in prob]
    return {"points": prob, "sets": sets}


def run_replicate(
    scenario: Scenario,
    methods: Optional[Sequence[str]] = None,
    rng: Optional[Rng] = None,
    cfg: Optional[RunConfig] = None,
    theta_source: Optional[np.ndarray] = None,
) -> List[Dict[str, Any]]:
    """
    Evaluate every method on one replicate; one row per method.

    The replicate stream defaults to ``scenario.rng()`` and the source
    coefficients to the suite-wide draw for ``scenario.seed``. Every method
    draws from its own child stream, so a method's row does not depend on
    which other methods run. A failure in any stage is recorded in the row.
    """
    cfg = cfg or RunConfig()
    methods = list(methods if methods is not None else cfg.grid.methods)
    rng = rng if rng is not None else scenario.rng()
    if theta_source is None:
        theta_source = theta_source_for_suite(scenario.seed, scenario.p)
    nominal_levels = cfg.grid.nominal_levels
    alphas = [1.0 - lvl for lvl in nominal_levels]
    streams = dict(zip(STREAM_NAMES, split_rng(rng, len(STREAM_NAMES))))
    tag = f"{scenario.response_kind} n_T={scenario.n_target} sigma_tl2={scenario.sigma_tl2} rep={scenario.replicate}"

    rows = {m: _base_row(scenario, m) for m in methods}
    runtimes = {m: 0.0 for m in methods}

    def fail(method: str, exc: BaseException) -> None:
        logger.error(f"[{tag}] {method} failed: {type(exc).__name__}: {exc}")
        rows[method].update(status="failed", error=f"{type(exc).__name__}: {exc}")

    try:
        data = _ReplicateData(scenario, np.asarray(theta_source, dtype=float), streams)
    except (RecastError, ValueError, RuntimeError) as e:
        for m in methods:
            fail(m, e)
        return [dict(rows[m], **{RUNTIME_COLUMN: 0.0}) for m in methods]

    # the source network is shared by RECaST-DNN and Unfreeze DNN
    source_net: Optional[SourceModel] = None
    source_net_error: Optional[BaseException] = None
    if {"recast_dnn", "unfreeze_dnn"} & set(methods):
        start = time.perf_counter()
        try:
            source_net = fit_source("mlp", data.source.dataset, standardize=True, cfg=cfg.mlp, rng=streams["source_fit"])
        except (RecastError, ValueError, RuntimeError) as e:
            source_net_error = e
        shared = time.perf_counter() - start
        for m in ("recast_dnn", "unfreeze_dnn"):
            if m in runtimes:
                runtimes[m] += shared

    for method in methods:
        row = rows[method]
        start = time.perf_counter()
        try:
            if method == "recast_linear":
                if scenario.response_kind == "continuous":
                    source = fit_ols(data.source.dataset)
                else:
                    source = fit_logistic(data.source.dataset, on_separation="warn")
                out = _run_recast(source, data, cfg, alphas, streams[method])
            elif method == "recast_dnn":
                if source_net is None:
                    raise source_net_error
                out = _run_recast(source_net, data, cfg, alphas, streams[method])
            elif method == "dnn":
                net = fit_source("mlp", data.target.dataset, standardize=True, cfg=cfg.mlp, rng=streams[method])
                out = _baseline_predictions(net, data, alphas)
            elif method == "unfreeze_dnn":
                if source_net is None:
                    raise source_net_error
                net = unfreeze_last_layer(source_net, data.target.dataset, cfg.mlp, streams[method])
                out = _baseline_predictions(net, data, alphas)
            else:
                raise ValueError(f"unknown method {method!r}")

            _score_rows(row, data, out["points"], out["sets"], nominal_levels)
            for key in ("posterior_delta_mean", "accept_rate", "floor_events"):
                if key in out:
                    row[key] = out[key]
        except (RecastError, ValueError, RuntimeError, FloatingPointError) as e:
            fail(method, e)
        runtimes[method] += time.perf_counter() - start
        logger.debug(f"[{tag}] {method} done in {runtimes[method]:.1f}s (status {row['status']})")

    return [dict(rows[m], **{RUNTIME_COLUMN: runtimes[m]}) for m in methods]


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

def _run_replicate_task(scenario: Scenario, cfg: RunConfig) -> List[Dict[str, Any]]:
    """Worker entry point; module level so the process pool can pickle it."""
    torch.set_num_threads(1)
    return run_replicate(scenario, cfg=cfg)


class ResultsWriter:
    """Appends replicate rows to the results CSV and runtimes to a sidecar; the only writer of both files."""

    def __init__(self, out_path: Path, nominal_levels: Sequence[float]):
        self.out_path = Path(out_path)
        self.timings_path = self.out_path.with_suffix(".timings.csv")
        self.columns = result_columns(nominal_levels)
        self.schema = _result_schema(nominal_levels)

        self._logger_prefix = (
            f"{self.__class__.__module__}."
            f"{self.__class__.__name__}"
        )

    def _get_logger(self, method_name: str):
        return logging.getLogger(f"{self._logger_prefix}.{method_name}")

    @staticmethod
    def _append(df: pl.DataFrame, path: Path) -> None:
        header = not path.exists() or path.stat().st_size == 0
        with open(path, "a", encoding="utf-8", newline="") as f:
            df.write_csv(f, include_header=header)

    def write(self, rows: List[Dict[str, Any]]) -> None:
        results = pl.DataFrame(
            [{c: r.get(c) for c in self.columns} for r in rows], schema=self.schema
        )
        timings = pl.DataFrame(
            [{**{k: r[k] for k in KEY_COLUMNS + ["method"]}, RUNTIME_COLUMN: r[RUNTIME_COLUMN]} for r in rows],
            schema={**{k: self.schema[k] for k in KEY_COLUMNS + ["method"]}, RUNTIME_COLUMN: pl.Float64},
        )
        self._append(results, self.out_path)
        self._append(timings, self.timings_path)

    def finalize(self) -> None:
        """Rewrite the results file in canonical row order so its bytes do not depend on completion order."""
        logger = self._get_logger("finalize")
        if not self.out_path.exists():
            return
        df = pl.read_csv(self.out_path, infer_schema=False)
        missing = [c for c in self.columns if c not in df.columns]
        if missing:
            logger.warning(f"{self.out_path} lacks columns {missing}; left in completion order")
            return
        method_rank = {m: i for i, m in enumerate(METHODS)}
        df = df.select(self.columns).sort(
            [
                pl.col("response_kind"),
                pl.col("n_target").cast(pl.Int64),
                pl.col("sigma_tl2").cast(pl.Float64),
                pl.col("replicate").cast(pl.Int64),
                pl.col("method").replace_strict(method_rank, return_dtype=pl.Int64),
            ]
        )
        df.write_csv(self.out_path)
        logger.info(f"Wrote {df.height} rows to {self.out_path}")


def _existing_keys(path: Path) -> set:
    if not path.exists() or path.stat().st_size == 0:
        return set()
    df = pl.read_csv(path, infer_schema=False)
    if df.is_empty():
        return set()
    return completed_keys(
        df.select(
            pl.col("response_kind"),
            pl.col("n_target").cast(pl.Int64),
            pl.col("sigma_tl2").cast(pl.Float64),
            pl.col("replicate").cast(pl.Int64),
        )
    )


def run_grid(
    scenarios: Iterable[Scenario],
    cfg: RunConfig,
    out_path: Path,
    parallelism: int = 1,
    resume: bool = False,
) -> Path:
    """
    Run every scenario replicate and write the results CSV.

    Output is identical for any parallelism: each replicate's streams come
    from (master seed, key) alone and the file is rewritten in canonical
    order at the end. With ``resume`` the replicates already present in
    out_path are skipped; otherwise an existing file is replaced.
    """
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    writer = ResultsWriter(out_path, cfg.grid.nominal_levels)
    scenarios = list(scenarios)

    if resume:
        done = _existing_keys(out_path)
        if done:
            logger.info(f"Resuming: {len(done)} replicate(s) already in {out_path}")
    else:
        done = set()
        for path in (out_path, writer.timings_path):
            if path.exists():
                logger.warning(f"Replacing existing file {path}")
                path.unlink()
    pending = [s for s in scenarios if s.key not in done]
    total = len(pending)
    logger.info(f"Running {total} replicate(s) with parallelism {parallelism}")
    start = time.perf_counter()

    def report(i: int) -> None:
        if total and (i == total or i % max(1, total // 20) == 0):
            logger.info(f"Grid progress: {i}/{total} replicates ({time.perf_counter() - start:.0f}s)")

    if parallelism <= 1:
        torch.set_num_threads(1)
        for i, scenario in enumerate(pending, start=1):
            writer.write(run_replicate(scenario, cfg=cfg))
            report(i)
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as executor:
            futures = {executor.submit(_run_replicate_task, s, cfg): s for s in pending}
            for i, future in enumerate(as_completed(futures), start=1):
                scenario = futures[future]
                try:
                    rows = future.result()
                except Exception as e:
                    # a crashed worker still leaves one failed row per method
                    logger.error(f"Replicate {scenario.key} crashed: {type(e).__name__}: {e}")
                    rows = [
                        dict(_base_row(scenario, m), status="failed", error=f"{type(e).__name__}: {e}", **{RUNTIME_COLUMN: 0.0})
                        for m in cfg.grid.methods
                    ]
                writer.write(rows)
                report(i)

    writer.finalize()
    return out_path
