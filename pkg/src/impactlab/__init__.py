"""Execution-cost simulation and estimation toolkit.

Simulates intraday broker execution (OU trading rate around a TWAP baseline,
transient price impact, Brownian mid noise) and measures broker cost
parameters with both the classic arrival-price slippage and noise-reduced
estimators: slippage against the realized TWAP benchmark and impact-weighted
mid-price changes.
"""

from .engine import PathMetrics, simulate_batch
from .experiments import (
    BatchReport,
    ExperimentConfig,
    export_paths,
    regression_study,
    run_batch,
    snr_study,
    snr_sweep,
    table2_report,
)
from .formulas import (
    CostMomentsReport,
    ImpactMomentsReport,
    cost_moments,
    expected_impact_trajectory,
    impact_moments,
    regression_design_coeffs,
    tstat,
)
from .metrics import (
    FillRecord,
    OrderMetrics,
    WeightCurve,
    general_weights,
    metrics_from_records,
    naive_cost,
    read_fill_records,
    total_impact,
    twap_slippage,
    twap_weights,
    weighted_impact,
)
from .model import (
    ModelParams,
    PricePath,
    RatePath,
    SimGrid,
    condition_on_terminal,
    cov_rate_total_quantity,
    emini_params,
    propagate_impact,
    simulate_mid_and_fills,
    simulate_rate_path,
    stationary_rate_moments,
    substream,
    var_total_quantity,
)
from .regression import RegressionFit, ols_fit, recover_params

__version__ = "0.1.0"
