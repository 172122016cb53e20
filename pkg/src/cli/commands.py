"""
Subcommand implementations. Each takes the parsed argparse namespace, writes
its outputs plus an effective_config.json next to them, and returns 0.
Errors propagate as RecastError subclasses (or OSError) for main() to map to
exit codes.
"""
import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import polars as pl
import torch

from config.settings import RunConfig, apply_desk_scale, load_run_config, settings, write_effective_config
from dataloader import (
    CsvDatasetLoader,
    PredictionRecord,
    average_reliability,
    overview,
    query_data,
    read_results,
    summarize_results,
)
from dataloader.data_loader import INTERCEPT_COLUMN
from dataloader.models import COVERED_PREFIX, SET_PREFIX
from recast.errors import ConfigError, DataError
from recast.model_io import (
    CHAIN_COLUMNS,
    load_model,
    read_posterior_sample,
    save_model,
    write_chain_csv,
    write_posterior_sample,
)
from recast.pipeline import RecastModel
from recast.schemas import ResponseKind
from recast.source_models import SourceModel, fit_source
from recast.stats_core import derive_rng
from simulation.harness import run_grid
from simulation.metrics import empirical_coverage
from simulation.plots import write_reliability_figure
from simulation.scenarios import enumerate_scenarios

logger = logging.getLogger(__name__)

MODEL_RESPONSE_KIND: Dict[str, Optional[ResponseKind]] = {
    "linear": "continuous",
    "logistic": "binary",
    "mlp": None,
}


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file, then --desk-scale, then --seed / --threads on top."""
    cfg = load_run_config(args.config)
    if args.desk_scale and not cfg.desk_scale:
        cfg = apply_desk_scale(cfg)
    return cfg.with_overrides(seed=args.seed, threads=args.threads)


def master_seed(cfg: RunConfig) -> int:
    return cfg.seed if cfg.seed is not None else settings.master_seed


def thread_count(cfg: RunConfig) -> int:
    return cfg.threads if cfg.threads is not None else settings.threads


def _command_record(args: argparse.Namespace, cfg: RunConfig) -> Dict[str, Any]:
    record = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "handler"}
    record["resolved_seed"] = master_seed(cfg)
    return record


def _target_loader(path: Path, model: SourceModel, label_col: str, require_label: bool = True) -> CsvDatasetLoader:
    """Loader whose feature columns must line up with the ones the model was fit on."""
    loader = CsvDatasetLoader(
        path,
        model.response_kind,
        label_col=label_col,
        add_intercept=INTERCEPT_COLUMN in model.feature_names,
        require_label=require_label,
    )
    if model.feature_names and loader.feature_names != list(model.feature_names):
        raise DataError(
            f"feature columns of {Path(path).name} {loader.feature_names} do not match "
            f"the model's {list(model.feature_names)}"
        )
    return loader


# ---------------------------------------------------------------------------
# fit-source
# ---------------------------------------------------------------------------

def cmd_fit_source(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    torch.set_num_threads(thread_count(cfg))
    response_kind = MODEL_RESPONSE_KIND[args.kind] or args.response_kind
    if MODEL_RESPONSE_KIND[args.kind] and args.response_kind and args.response_kind != response_kind:
        raise ConfigError(f"--response-kind {args.response_kind} conflicts with model kind {args.kind}")
    if response_kind is None:
        raise ConfigError(f"--response-kind is required for --kind {args.kind}")

    loader = CsvDatasetLoader(args.data, response_kind, label_col=args.label_col, add_intercept=not args.no_intercept)
    loader.require_both_classes()
    dataset = loader.to_dataset()
    model = fit_source(
        args.kind,
        dataset,
        standardize=not args.no_standardize,
        cfg=cfg.mlp,
        rng=derive_rng(master_seed(cfg), "fit-source", args.kind),
    )
    out = save_model(model, args.out)
    write_effective_config(cfg, out.parent, _command_record(args, cfg))
    print(f"{args.kind} source model ({dataset.n} rows, {dataset.p} features) -> {out}")
    return 0


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    model = load_model(args.model)
    loader = _target_loader(args.data, model, args.label_col)
    # a one-class target still has a proper posterior
    loader.require_both_classes(strict=False)
    target = loader.to_dataset()

    recast = RecastModel(model, cfg.quadrature, cfg.prior, cfg.mcmc, cfg.predictive)
    sample = recast.calibrate(target, derive_rng(master_seed(cfg), "calibrate"))
    out = write_posterior_sample(sample, model.response_kind, args.out)

    chain = recast.chain
    diagnostics = {
        "response_kind": model.response_kind,
        "n_target": target.n,
        "n_post": int(sample.shape[0]),
        "accept_rate": chain.accept_rate,
        "proposal_sds": chain.proposal_sds.tolist(),
        "high_rejection": chain.high_rejection,
        "floor_events": chain.floor_events,
        "total_iters": chain.total_iters,
        "burn_in": chain.burn_in,
        "keep_last": chain.keep_last,
        "posterior_mean": dict(zip(["delta", "gamma", "sigma"], sample.mean(axis=0).tolist())),
    }
    diag_path = out.with_suffix(".diagnostics.json")
    diag_path.write_text(json.dumps(diagnostics, indent=2), encoding="utf-8")
    if args.chain_out:
        write_chain_csv(chain, args.chain_out)
    write_effective_config(cfg, out.parent, _command_record(args, cfg))
    print(
        f"posterior sample ({sample.shape[0]} draws, acceptance {chain.accept_rate:.3f}) -> {out}"
    )
    return 0


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

def _alpha_tag(alpha: float) -> str:
    return f"{alpha:g}"


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    alphas: List[float] = list(args.alpha) if args.alpha else list(cfg.predictive.alphas)
    if any(not 0.0 < a < 1.0 for a in alphas):
        raise ConfigError(f"--alpha values must lie in (0, 1), got {alphas}")

    model = load_model(args.model)
    recast = RecastModel(model, cfg.quadrature, cfg.prior, cfg.mcmc, cfg.predictive)
    recast.use_posterior_sample(read_posterior_sample(args.posterior))
    loader = _target_loader(args.data, model, args.label_col, require_label=False)
    predictions = recast.predict(loader.features(), derive_rng(master_seed(cfg), "predict"), alphas)
    labels = loader.labels()

    label_values = labels.tolist() if labels is not None else [None] * len(predictions)
    records = []
    for p, y in zip(predictions, label_values):
        extra: Dict[str, Any] = {f"{SET_PREFIX}{_alpha_tag(a)}": p.sets[a].label() for a in alphas}
        if y is not None:
            extra.update({f"{COVERED_PREFIX}{_alpha_tag(a)}": bool(p.sets[a].contains(y)) for a in alphas})
        records.append(
            PredictionRecord(
                row=p.row,
                f_tilde=p.f_tilde,
                point=p.point,
                p_tilde=p.p_tilde,
                label=y,
                **extra,
            )
        )

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pl.DataFrame([r.to_row() for r in records]).write_csv(out)
    logger.info(f"Wrote {len(predictions)} predictions to {out}")

    if labels is not None:
        levels = [1.0 - a for a in alphas]
        coverage = empirical_coverage([p.sets for p in predictions], labels, levels)
        summary = pl.DataFrame(
            {
                "alpha": alphas,
                "nominal": levels,
                "empirical": [coverage[lvl] for lvl in levels],
                "n": [len(predictions)] * len(alphas),
            }
        )
        summary.write_csv(out.with_suffix(".coverage.csv"))
        print(summary)
    write_effective_config(cfg, out.parent, _command_record(args, cfg))
    print(f"{len(predictions)} predictions -> {out}")
    return 0


# ---------------------------------------------------------------------------
# replicate
# ---------------------------------------------------------------------------

def cmd_replicate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    seed = master_seed(cfg)
    out_dir = Path(args.out_dir or cfg.output_dir or settings.output_dir)
    out = out_dir / "results.csv"
    write_effective_config(cfg, out_dir, _command_record(args, cfg))

    scenarios = enumerate_scenarios(cfg.grid, seed)
    run_grid(scenarios, cfg, out, parallelism=thread_count(cfg), resume=args.resume)

    results = read_results(out)
    summary = summarize_results(results, levels=[0.95])
    summary.write_csv(out_dir / "summary.csv")
    reliability = average_reliability(results)
    if not reliability.is_empty():
        reliability.write_csv(out_dir / "reliability.csv")
    info = overview(results)
    print(
        f"{info['total_rows']} rows ({info['failed_rows']} failed) over {info['scenarios']} scenarios -> {out}"
    )
    return 0


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def _summarize_chain(path: Path) -> pl.DataFrame:
    df = pl.read_csv(path)
    params = [c for c in CHAIN_COLUMNS[1:4] if df[c].null_count() < df.height and not df[c].is_nan().all()]
    rows = []
    for name in params:
        values = df[name].to_numpy()
        rows.append(
            {
                "parameter": name,
                "mean": float(np.mean(values)),
                "sd": float(np.std(values, ddof=1)) if values.size > 1 else float("nan"),
                "q025": float(np.quantile(values, 0.025)),
                "median": float(np.median(values)),
                "q975": float(np.quantile(values, 0.975)),
                # fraction of consecutive retained states that moved
                "move_rate": float(np.mean(np.diff(values) != 0.0)) if values.size > 1 else float("nan"),
            }
        )
    return pl.DataFrame(rows)


def _select_results(results: pl.DataFrame, args: argparse.Namespace) -> pl.DataFrame:
    where: List[pl.Expr] = []
    if getattr(args, "method", None):
        where.append(pl.col("method").is_in(list(args.method)))
    if getattr(args, "response_kind", None):
        where.append(pl.col("response_kind") == args.response_kind)
    if not where:
        return results
    selected = query_data(results, where=where)
    if selected.is_empty():
        raise DataError(f"no results rows match the filters (method={args.method}, response_kind={args.response_kind})")
    logger.info(f"Kept {selected.height} of {results.height} results rows after filtering")
    return selected


def cmd_diagnostics(args: argparse.Namespace) -> int:
    path = Path(args.input)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    out_dir = Path(args.out_dir) if args.out_dir else path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    header = pl.read_csv(path, n_rows=0).columns

    if set(CHAIN_COLUMNS) <= set(header):
        summary = _summarize_chain(path)
        summary.write_csv(out_dir / f"{path.stem}.summary.csv")
        print(summary)
        return 0

    results = _select_results(read_results(path), args)
    info = overview(results)
    logger.info(f"Results overview: {info}")
    summary = summarize_results(results, levels=args.level or [0.95])
    summary.write_csv(out_dir / f"{path.stem}.summary.csv")
    reliability = average_reliability(results)
    if not reliability.is_empty():
        reliability.write_csv(out_dir / f"{path.stem}.reliability.csv")
        series = reliability.with_columns(
            pl.concat_str(
                [pl.col("method_label"), pl.lit(" "), pl.col("response_kind"), pl.lit(" sigma_tl2="), pl.col("sigma_tl2")]
            ).alias("series")
        )
        write_reliability_figure(
            series,
            out_dir / f"{path.stem}.reliability.html",
            color="series",
            facet_col="n_target" if reliability["n_target"].n_unique() > 1 else None,
        )
    with pl.Config(tbl_rows=40, tbl_cols=12):
        print(summary)
    return 0
