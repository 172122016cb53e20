"""
Evaluation metrics: RMSE, rank-statistic AUC with its ROC curve, empirical
coverage of prediction sets and reliability curves.
"""
import math
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
import polars as pl
from scipy import stats

from recast.errors import DataError
from recast.schemas import PredictionSet

# tolerance when matching a requested nominal level to a set's nominal_level
LEVEL_TOL = 1e-9


def _paired(a: Sequence[float], b: Sequence[float], what: str) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise DataError(f"{what}: length mismatch ({a.size} vs {b.size})")
    if a.size == 0:
        raise DataError(f"{what}: empty input")
    return a, b


def rmse(point_preds: Sequence[float], truths: Sequence[float]) -> float:
    pred, truth = _paired(point_preds, truths, "rmse")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def _split_classes(scores: np.ndarray, labels: np.ndarray) -> Tuple[int, int]:
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise DataError("AUC labels must be 0 or 1")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError(f"AUC needs both classes in the test set, got {n_pos} positive and {n_neg} negative")
    return n_pos, n_neg


def auc(scores: Sequence[float], labels: Sequence[float]) -> float:
    """
    Mann-Whitney form: (sum of positive ranks - n1 (n1 + 1) / 2) / (n1 n0),
    with tied scores given their average rank.
    """
    scores, labels = _paired(scores, labels, "auc")
    n_pos, n_neg = _split_classes(scores, labels)
    ranks = stats.rankdata(scores, method="average")
    u = ranks[labels == 1.0].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores: Sequence[float], labels: Sequence[float]) -> pl.DataFrame:
    """
    False and true positive rates when predicting 1 for score >= threshold, at
    every distinct score (descending), starting from the (0, 0) corner.
    The trapezoid area under (fpr, tpr) equals auc().
    """
    scores, labels = _paired(scores, labels, "roc_curve")
    n_pos, n_neg = _split_classes(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    # last index of each run of equal scores
    distinct = np.flatnonzero(np.diff(s) != 0.0)
    cut = np.r_[distinct, s.size - 1]
    tps = np.cumsum(y)[cut]
    fps = (cut + 1) - tps
    return pl.DataFrame(
        {
            "threshold": np.r_[np.inf, s[cut]],
            "fpr": np.r_[0.0, fps / n_neg],
            "tpr": np.r_[0.0, tps / n_pos],
        }
    )


def _set_at(row_sets: Mapping[float, PredictionSet], level: float) -> PredictionSet:
    for pset in row_sets.values():
        if math.isclose(pset.nominal_level, level, abs_tol=LEVEL_TOL):
            return pset
    raise DataError(f"no prediction set at nominal level {level} (have {sorted(row_sets)})")


def empirical_coverage(
    sets: Sequence[Mapping[float, PredictionSet]],
    truths: Sequence[float],
    nominal_levels: Sequence[float],
) -> Dict[float, float]:
    """
    Fraction of truths inside their row's prediction set at each nominal level.

    ``sets`` holds one mapping per test row; each mapping's values are the
    row's prediction sets (keys are not inspected, the sets' own
    nominal_level is matched).
    """
    truths = np.asarray(truths, dtype=float).ravel()
    if len(sets) != truths.size:
        raise DataError(f"empirical_coverage: {len(sets)} rows of sets for {truths.size} truths")
    if truths.size == 0:
        raise DataError("empirical_coverage: empty input")
    coverage = {}
    for level in nominal_levels:
        hits = sum(_set_at(row, level).contains(y) for row, y in zip(sets, truths))
        coverage[float(level)] = hits / truths.size
    return coverage


def reliability_curve(
    sets_by_level: Mapping[float, Sequence[PredictionSet]],
    truths: Sequence[float],
) -> pl.DataFrame:
    """
    (nominal, empirical, se) for each nominal level, se being the binomial
    standard error sqrt(c (1 - c) / n) of the empirical coverage c.
    """
    truths = np.asarray(truths, dtype=float).ravel()
    n = truths.size
    if n == 0:
        raise DataError("reliability_curve: empty input")
    rows: List[Dict[str, float]] = []
    for level in sorted(sets_by_level):
        level_sets = sets_by_level[level]
        if len(level_sets) != n:
            raise DataError(f"reliability_curve: {len(level_sets)} sets at level {level} for {n} truths")
        c = sum(s.contains(y) for s, y in zip(level_sets, truths)) / n
        rows.append({"nominal": float(level), "empirical": c, "se": math.sqrt(c * (1.0 - c) / n)})
    return pl.DataFrame(rows, schema={"nominal": pl.Float64, "empirical": pl.Float64, "se": pl.Float64})


def sets_by_level(sets: Sequence[Mapping[float, PredictionSet]], nominal_levels: Sequence[float]) -> Dict[float, List[PredictionSet]]:
    """Regroup per-row set mappings into one list of sets per nominal level."""
    return {float(level): [_set_at(row, level) for row in sets] for level in nominal_levels}
