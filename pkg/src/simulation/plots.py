"""
Reliability-curve figures written as standalone HTML.
"""
import logging
from pathlib import Path
from typing import Optional

import plotly.express as px
import plotly.graph_objects as go
import polars as pl

from recast.errors import DataError

logger = logging.getLogger(__name__)


def write_reliability_figure(
    curve: pl.DataFrame,
    path: Path,
    title: str = "Reliability curves",
    color: Optional[str] = "method_label",
    facet_col: Optional[str] = None,
) -> Path:
    """
    Nominal versus empirical coverage, one line per ``color`` group, with the
    identity line for reference. ``curve`` needs at least the nominal and
    empirical columns (as produced by reliability_curve or average_reliability).
    """
    missing = [c for c in ("nominal", "empirical") if c not in curve.columns]
    if missing:
        raise DataError(f"reliability curve lacks column(s) {missing}")
    if curve.is_empty():
        raise DataError("reliability curve is empty")
    color = color if color in curve.columns else None
    facet_col = facet_col if facet_col in curve.columns else None

    fig = px.line(
        curve,
        x="nominal",
        y="empirical",
        color=color,
        facet_col=facet_col,
        error_y="se" if "se" in curve.columns else None,
        markers=True,
        title=title,
        labels={
            "nominal": "Nominal coverage",
            "empirical": "Empirical coverage",
            "method_label": "Method",
        },
    )
    lo = float(curve["nominal"].min())
    fig.add_trace(
        go.Scatter(x=[lo, 1.0], y=[lo, 1.0], mode="lines", name="Nominal", line=dict(color="gray", dash="dash"))
    )
    fig.update_layout(
        height=450,
        xaxis_range=[lo, 1.0],
        yaxis_range=[0.0, 1.0],
        hovermode="x unified",
        legend_title_text="",
    )

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.write_html(path, include_plotlyjs="cdn")
    logger.info(f"Wrote reliability figure to {path}")
    return path
