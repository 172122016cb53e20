"""
Filtering, aggregation and summaries over results tables.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Type, TypedDict, Union

import polars as pl
from pydantic import BaseModel, ValidationError

from recast.errors import DataError

from .models import (
    COVERAGE_PREFIX,
    GROUP_COLUMNS,
    KEY_COLUMNS,
    MetricsRecord,
    coverage_column,
    coverage_level,
)

logger = logging.getLogger(__name__)

# Columns whose mean and standard error are reported per scenario group.
SUMMARY_METRICS = ["rmse", "rmse_mean", "auc", "posterior_delta_mean", "accept_rate"]

class ResultsOverview(TypedDict):
    total_rows: int
    failed_rows: int
    scenarios: int
    methods: list[str]
    replicates_per_scenario: Optional[Dict[str, int]]  # {'min': .., 'max': ..}

Where = Optional[Union[pl.Expr, List[pl.Expr]]]

_AGGREGATIONS = {
    "sum": lambda c: pl.col(c).sum(),
    "mean": lambda c: pl.col(c).mean(),
    "std": lambda c: pl.col(c).std(),
    # standard error of the mean over non-null values
    "se": lambda c: pl.col(c).std() / pl.col(c).count().cast(pl.Float64).sqrt(),
    "count": lambda c: pl.col(c).count(),
    "min": lambda c: pl.col(c).min(),
    "max": lambda c: pl.col(c).max(),
}

def _filtered(df: pl.DataFrame, where: Where) -> pl.DataFrame:
    """Apply one predicate or the conjunction of a list of them."""
    if where is None:
        return df
    if isinstance(where, list):
        return df.filter(pl.all_horizontal(where)) if where else df
    return df.filter(where)

def _ordered(df: pl.DataFrame, sort_by, descending: bool, limit: Optional[int]) -> pl.DataFrame:
    if sort_by is not None:
        df = df.sort(sort_by, descending=descending)
    return df.head(limit) if limit is not None else df

def query_data(
    df: pl.DataFrame | pl.LazyFrame,
    where: Where = None,
    select: Optional[List[str]] = None,
    limit: Optional[int] = None,
    sort_by: Optional[Union[str, List[str]]] = None,
    descending: bool = False,
) -> pl.DataFrame:
    """
    Query a results table with filtering, selection, and sorting.
    """
    if isinstance(df, pl.LazyFrame):
        df = df.collect()
    if df is None or df.is_empty():
        return pl.DataFrame()

    df = _filtered(df, where)
    if select is not None:
        df = df.select(select)
    return _ordered(df, sort_by, descending, limit)

def aggregate_table(
    df: pl.DataFrame,
    group_by: List[str],
    metrics: Dict[str, Any],
    where: Where = None,
    sort_by: Optional[Union[str, List[str]]] = None,
    descending: bool = False,
    limit: Optional[int] = None,
) -> pl.DataFrame:
    """
    Group a results table and aggregate metric columns.

    ``metrics`` maps a column to one aggregation or a list of them; each
    aggregation is a name (one of ``_AGGREGATIONS``) or a (name, alias)
    tuple. The default alias is ``<column>_<name>``.
    """
    if df is None or df.is_empty():
        return pl.DataFrame()

    exprs: Dict[str, pl.Expr] = {}
    for col, requested in metrics.items():
        for item in requested if isinstance(requested, list) else [requested]:
            func, alias = item if isinstance(item, tuple) else (item, None)
            if func not in _AGGREGATIONS:
                raise ValueError(f"Unsupported aggregation: {func}")
            name = alias or f"{col}_{func}"
            exprs[name] = _AGGREGATIONS[func](col).alias(name)

    result = _filtered(df, where).group_by(group_by, maintain_order=True).agg(list(exprs.values()))
    return _ordered(result, sort_by, descending, limit)

# ---------------------------------------------------------------------------
# Results files
# ---------------------------------------------------------------------------

def validate_sample(
    df: pl.DataFrame,
    model_class: Type[BaseModel],
    sample_size: int = 10,
    strict: bool = False,
    seed: int = 0,
) -> None:
    """
    Validate a sample of the rows against a Pydantic model.

    Args:
        df: Polars DataFrame to sample from
        model_class: Pydantic model class to validate against
        sample_size: Number of records to sample (default: 10)
        strict: If True, raise DataError on failed validation; otherwise log a warning
    """
    if df.is_empty():
        return
    sample_df = df if df.height <= sample_size else df.sample(n=sample_size, seed=seed)
    records = sample_df.to_dicts()

    errors = []
    for i, record in enumerate(records):
        try:
            model_class.model_validate(record)
        except ValidationError as e:
            error_details = e.errors()[0]
            errors.append(f"Row {i} | Field: {error_details['loc']} | Error: {error_details['msg']}")

    if errors:
        err_msg = (
            f"Validation failed for {model_class.__name__} in {len(errors)}/{len(records)} sampled rows:\n"
            + "\n".join(errors[:5])
        )
        if strict:
            logger.error(err_msg)
            raise DataError(err_msg)
        logger.warning(err_msg)
    else:
        logger.info(f"Successfully validated {len(records)} rows against {model_class.__name__}")

def read_results(path: Path, strict: bool = False) -> pl.DataFrame:
    """Read a results CSV written by the simulation harness."""
    path = Path(path)
    try:
        df = pl.read_csv(path, infer_schema_length=None)
    except (pl.exceptions.PolarsError, OSError) as e:
        raise DataError(f"cannot read results file {path}: {e}") from e
    missing = [c for c in KEY_COLUMNS + ["method", "status"] if c not in df.columns]
    if missing:
        raise DataError(f"{path} is not a results file: missing column(s) {missing}")
    # empty columns are inferred as strings
    numeric = [c for c in SUMMARY_METRICS + ["sigma_tl2"] + coverage_columns(df) if c in df.columns]
    df = df.with_columns(pl.col(c).cast(pl.Float64, strict=False) for c in numeric)
    if "floor_events" in df.columns:
        df = df.with_columns(pl.col("floor_events").cast(pl.Int64, strict=False))
    if "error" in df.columns:
        df = df.with_columns(pl.col("error").cast(pl.Utf8))
    validate_sample(df, MetricsRecord, strict=strict)
    return df

def coverage_columns(df: pl.DataFrame) -> List[str]:
    return sorted((c for c in df.columns if c.startswith(COVERAGE_PREFIX)), key=coverage_level)

def overview(df: pl.DataFrame) -> ResultsOverview:
    if df is None or df.is_empty():
        return {"total_rows": 0, "failed_rows": 0, "scenarios": 0, "methods": [], "replicates_per_scenario": None}
    counts = aggregate_table(df, GROUP_COLUMNS, {"replicate": [("count", "n")]})
    return {
        "total_rows": df.height,
        "failed_rows": df.filter(pl.col("status") != "ok").height,
        "scenarios": df.select(KEY_COLUMNS[:3]).unique().height,
        "methods": sorted(df["method"].unique().to_list()),
        "replicates_per_scenario": {"min": int(counts["n"].min()), "max": int(counts["n"].max())},
    }

def summarize_results(
    results: Union[pl.DataFrame, Path],
    levels: Optional[List[float]] = None,
) -> pl.DataFrame:
    """
    Mean and standard error per (response kind, n_target, sigma_tl2, method)
    of RMSE, AUC, posterior delta mean, acceptance rate and the coverage at
    the requested nominal levels. Failed rows are excluded and counted.
    """
    df = read_results(results) if isinstance(results, (str, Path)) else results
    if df.is_empty():
        return pl.DataFrame()
    ok = df.filter(pl.col("status") == "ok")
    cov_cols = [coverage_column(lvl) for lvl in (levels if levels is not None else [0.95])]
    cov_cols = [c for c in cov_cols if c in df.columns]
    metrics: Dict[str, Any] = {"replicate": [("count", "replicates")]}
    for col in [c for c in SUMMARY_METRICS if c in df.columns] + cov_cols:
        metrics[col] = ["mean", "se"]
    summary = aggregate_table(ok, GROUP_COLUMNS + ["method_label"], metrics, sort_by=GROUP_COLUMNS)

    failures = df.group_by(GROUP_COLUMNS).agg((pl.col("status") != "ok").sum().alias("failed"))
    summary = summary.join(failures, on=GROUP_COLUMNS, how="left")
    # all-null metric columns (e.g. auc for continuous rows) are dropped for readability
    keep = [c for c in summary.columns if summary[c].null_count() < summary.height]
    return summary.select(keep)

def average_reliability(results: Union[pl.DataFrame, Path]) -> pl.DataFrame:
    """
    Reliability curves averaged over replicates: one row per scenario group,
    method and nominal level with columns nominal, empirical (mean) and se.
    """
    df = read_results(results) if isinstance(results, (str, Path)) else results
    cov_cols = coverage_columns(df)
    if df.is_empty() or not cov_cols:
        return pl.DataFrame()
    long = (
        df.filter(pl.col("status") == "ok")
        .select(GROUP_COLUMNS + ["method_label"] + cov_cols)
        .unpivot(index=GROUP_COLUMNS + ["method_label"], on=cov_cols, variable_name="column", value_name="coverage")
        .with_columns(
            pl.col("column").str.strip_prefix(COVERAGE_PREFIX).cast(pl.Float64).alias("nominal")
        )
    )
    return aggregate_table(
        long.drop_nulls("coverage"),
        GROUP_COLUMNS + ["method_label", "nominal"],
        {"coverage": [("mean", "empirical"), ("se", "se")]},
        sort_by=GROUP_COLUMNS + ["nominal"],
    )

def completed_keys(df: pl.DataFrame) -> set[Tuple[str, int, float, int]]:
    """(response_kind, n_target, sigma_tl2, replicate) keys present in a results table."""
    if df is None or df.is_empty():
        return set()
    return {
        (str(r[0]), int(r[1]), float(r[2]), int(r[3]))
        for r in df.select(KEY_COLUMNS).unique().iter_rows()
    }
