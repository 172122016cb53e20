"""
Data loader module for CSV datasets (one label column, numeric features).
"""
import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
import polars as pl

from recast.errors import DataError
from recast.schemas import Dataset, ResponseKind

INTERCEPT_COLUMN = "intercept"


class CsvDatasetLoader:
    """
    Loads a UTF-8 CSV with a header row into a `Dataset`.

    One column (``label_col``) holds the labels; every other column is a numeric
    feature. Malformed cells are reported with their 1-based file line number
    (the header is line 1).
    """

    def __init__(
        self,
        path: Path,
        response_kind: ResponseKind,
        label_col: str = "y",
        add_intercept: bool = True,
        require_label: bool = True,
    ):
        """
        Initialize the data loader.

        Args:
            path: CSV file
            response_kind: "continuous" or "binary"
            label_col: name of the label column (the --label-col flag)
            add_intercept: prepend a column of ones named "intercept" unless one exists
            require_label: if False a missing label column is allowed (prediction inputs)
        """
        self.path = Path(path).resolve()
        self.response_kind = response_kind
        self.label_col = label_col
        self.add_intercept = add_intercept
        self.require_label = require_label

        # intialize logging pattern
        self._logger_prefix = (
            f"{self.__class__.__module__}."
            f"{self.__class__.__name__}"
        )
        self._df: pl.DataFrame | None = None
        # NOTE: Lazy loading - the file is read on first access via the df property

    def _get_logger(self, method_name: str):
        return logging.getLogger(f"{self._logger_prefix}.{method_name}")

    @property
    def df(self) -> pl.DataFrame:
        """Validated numeric table (label column included when present)."""
        if self._df is None:
            self._df = self._read_csv()
        return self._df

    @property
    def has_label(self) -> bool:
        return self.label_col in self.df.columns

    def _feature_columns(self) -> List[str]:
        """CSV feature columns; an existing intercept column is moved to the front."""
        names = [c for c in self.df.columns if c != self.label_col]
        if INTERCEPT_COLUMN in names:
            names = [INTERCEPT_COLUMN] + [c for c in names if c != INTERCEPT_COLUMN]
        return names

    @property
    def feature_names(self) -> List[str]:
        names = self._feature_columns()
        if self.add_intercept and INTERCEPT_COLUMN not in names:
            names = [INTERCEPT_COLUMN] + names
        return names

    def _read_csv(self) -> pl.DataFrame:
        logger = self._get_logger("_read_csv")
        if not self.path.exists():
            raise DataError(f"CSV file not found: {self.path}")
        try:
            raw = pl.read_csv(self.path, infer_schema=False, encoding="utf8")
        except (pl.exceptions.PolarsError, UnicodeDecodeError) as e:
            raise DataError(f"cannot parse {self.path}: {e}") from e
        logger.info(f"Loaded {self.path.name}: {raw.height} rows, {raw.width} columns")

        if raw.height == 0:
            raise DataError(f"{self.path} has a header but no data rows")
        if self.label_col not in raw.columns and self.require_label:
            raise DataError(
                f"label column '{self.label_col}' (--label-col) not found in {self.path.name}; "
                f"columns are {raw.columns}"
            )

        df = raw.with_columns(pl.col(c).str.strip_chars().cast(pl.Float64, strict=False) for c in raw.columns)
        for col in raw.columns:
            bad = df.select(
                pl.arg_where(pl.col(col).is_null() | ~pl.col(col).is_finite())
            ).to_series()
            if bad.len():
                row = int(bad[0])
                line = row + 2
                raise DataError(
                    f"{self.path.name}, line {line}: column '{col}' has non-numeric or missing value "
                    f"{raw[col][row]!r} ({bad.len()} bad cell(s) in this column)"
                )

        if self.label_col in df.columns and self.response_kind == "binary":
            labels = df[self.label_col]
            bad = df.select(pl.arg_where(~pl.col(self.label_col).is_in([0.0, 1.0]))).to_series()
            if bad.len():
                row = int(bad[0])
                raise DataError(
                    f"{self.path.name}, line {row + 2}: binary label must be 0 or 1, got {labels[row]!r}"
                )
        return df

    def features(self) -> np.ndarray:
        X = self.df.select(self._feature_columns()).to_numpy().astype(float)
        if self.add_intercept and INTERCEPT_COLUMN not in self.df.columns:
            X = np.column_stack([np.ones(X.shape[0]), X])
        return X

    def labels(self) -> Optional[np.ndarray]:
        if not self.has_label:
            return None
        return self.df[self.label_col].to_numpy().astype(float)

    def to_dataset(self) -> Dataset:
        """Features and labels as a `Dataset`; requires the label column."""
        y = self.labels()
        if y is None:
            raise DataError(f"label column '{self.label_col}' (--label-col) not found in {self.path.name}")
        return Dataset(
            X=self.features(),
            y=y,
            response_kind=self.response_kind,
            feature_names=self.feature_names,
            has_intercept=self.add_intercept or INTERCEPT_COLUMN in self.df.columns,
        )

    def require_both_classes(self, strict: bool = True) -> bool:
        """
        Check that binary labels contain both classes.

        Raises DataError when strict; otherwise logs a warning and returns False.
        """
        y = self.labels()
        if self.response_kind != "binary" or y is None or np.unique(y).size >= 2:
            return True
        message = f"single-class binary data in {self.path.name}: every label is {int(y[0])}"
        if strict:
            raise DataError(message)
        self._get_logger("require_both_classes").warning(message)
        return False
