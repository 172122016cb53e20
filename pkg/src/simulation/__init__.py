'''
Initialize the simulation package.
The package include:
- `scenarios` synthetic source/target/test data and the experiment grid.
- `metrics` RMSE, AUC, ROC curves, empirical coverage and reliability curves.
- `harness` one replicate across all methods, and the resumable grid runner.
- `plots` reliability-curve figures.
'''
from .scenarios import (
    GeneratedData,
    Scenario,
    draw_latent_cauchy,
    enumerate_scenarios,
    gen_data,
    make_theta_source,
    make_theta_target,
    simulate_fixed_feature_target,
    theta_source_for_suite,
)
from .metrics import auc, empirical_coverage, reliability_curve, rmse, roc_curve, sets_by_level
from .harness import run_grid, run_replicate
from .plots import write_reliability_figure
