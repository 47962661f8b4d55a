"""Early-warning forecasts of emergency-department crowding.

Pipeline: hourly occupancy series are labeled per day and section, turned
into per-day feature matrices, scored by a from-scratch histogram
gradient-boosting model in an expanding-window backtest, evaluated with
bootstrap confidence intervals and explained with Shapley attributions. A
seeded synthetic generator provides calibrated data for end-to-end runs.
"""

__version__ = "0.1.0"

from .backtest import (
    BacktestResult,
    EvalReport,
    PredictionRecord,
    SplitPlan,
    assemble_report,
    run_backtest,
)
from .explain import Attribution, GroupImportance, group_importance, shapley_exact, tree_shap
from .features import (
    DayMatrix,
    FeatureLayout,
    HolidayCalendar,
    WeatherDay,
    build_day_matrix,
    build_feature_dataset,
    stack_training_rows,
)
from .gbdt.boosting import Ensemble, TrainConfig, fit, goss_sample
from .metrics import (
    ConfusionCounts,
    MetricWithCI,
    auprc,
    auroc,
    bootstrap_ci,
    confusion,
    rates,
)
from .series import (
    CrowdingConfig,
    DayLabel,
    HourlySeries,
    Section,
    daily_prevalence,
    hourly_crowding,
    label_day,
)
from .synthgen import SynthConfig, calibration_report, generate

__all__ = [
    "Attribution",
    "BacktestResult",
    "ConfusionCounts",
    "CrowdingConfig",
    "DayLabel",
    "DayMatrix",
    "Ensemble",
    "EvalReport",
    "FeatureLayout",
    "GroupImportance",
    "HolidayCalendar",
    "HourlySeries",
    "MetricWithCI",
    "PredictionRecord",
    "Section",
    "SplitPlan",
    "SynthConfig",
    "TrainConfig",
    "WeatherDay",
    "assemble_report",
    "auprc",
    "auroc",
    "bootstrap_ci",
    "build_day_matrix",
    "build_feature_dataset",
    "calibration_report",
    "confusion",
    "daily_prevalence",
    "fit",
    "generate",
    "goss_sample",
    "group_importance",
    "hourly_crowding",
    "label_day",
    "rates",
    "run_backtest",
    "shapley_exact",
    "stack_training_rows",
    "tree_shap",
]
