"""Claims-reserving toolkit: development-rate GLMs on run-off triangles.

The age-only development model replicates classical chain ladder exactly;
age-cohort, age-period and age-period-cohort structures extend it, with
time-series extrapolation of the cohort and period effects. Claim-amount
GLM baselines, deviance-residual diagnostics and diagonal-holdout
backtesting round out the pipeline.
"""

from .triangle import (
    RunOffTriangle,
    ExposureTriangle,
    HazardTriangle,
    read_triangle_csv,
    write_triangle_csv,
    occurrence_to_incremental,
)
from .hazard_glm import ModelSpec, HazardFit, fit, fit_age_closed_form, fitted_hazard
from .forecast import (
    ArimaDriftParams,
    RwDriftParams,
    EffectForecast,
    fit_arima_110_drift,
    forecast_arima,
    fit_rw_drift,
    forecast_rw,
    forecast_effects,
)
from .reserving import (
    ReserveReport,
    hazard_to_factor,
    factor_to_hazard,
    predicted_factors,
    complete,
    chain_ladder_factors,
    chain_ladder_reserve,
    hazard_reserve,
)
from .amount_glm import AmountFit, fit_amount, predict_amount_lower, amount_reserve
from .diagnostics import (
    ResidualMatrix,
    scaled_deviance_residuals,
    residuals_for_hazard_fit,
    residuals_for_amount_fit,
    residual_export,
)
from .evaluation import (
    HoldoutSplit,
    EvalReport,
    split,
    error_incidence,
    rank_models,
    family_bakeoff,
    run_corpus,
    reserve_for_model,
)
from . import datasets, errors

__version__ = "0.1.0"
