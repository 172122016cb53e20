'''
Initialize the dataloader package.
The package include:
- `CsvDatasetLoader` reads CSV datasets (one label column, numeric features) into a `Dataset`.
- `models` holds the pydantic row models of the results and predictions CSVs.
- `analysis_functions` filter, aggregate and summarize simulation results tables.
'''
from .data_loader import CsvDatasetLoader
from .models import MetricsRecord, PredictionRecord
from .analysis_functions import (
    ResultsOverview,
    query_data,
    aggregate_table,
    read_results,
    overview,
    summarize_results,
    average_reliability,
    completed_keys,
)
