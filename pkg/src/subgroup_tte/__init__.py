"""Treatment effects in the principal stratum of early biomarker responders.

Estimators for survival-type effects in patients who would respond on
treatment, an event-driven trial simulator with a Monte Carlo truth, and a
stratified bootstrap.
"""

from .bootstrap import BootstrapConfig, IntervalEstimate, bootstrap_estimate, bootstrap_methods
from .coxph import CoxModel, average_predicted_curve, fit_cox, predict_survival
from .data import (
    PatientRecord,
    StratumProportions,
    TrialDataset,
    load_dataset,
    responder_mask,
    stratum_proportions,
    write_dataset,
)
from .errors import (
    ConvergenceError,
    DataError,
    EstimationError,
    ExtrapolationWarning,
    MonotonicityWarning,
    RankDeficiencyError,
    SeparationError,
)
from .estimators import (
    EstimateReport,
    Method,
    MethodSpec,
    default_methods,
    estimate,
    estimate_many,
    mea_control_curve,
    mea_weights,
    naive_control_curve,
    ppr_control_curve,
    summarize_hazard_ratio,
    treatment_subgroup_curve,
    wpp_control_curve,
)
from .logistic import LogisticModel, fit_logistic, predict_probability
from .simulator import ScenarioConfig, TruthReport, default_scenario, simulate_trial, true_subgroup_curves
from .survival import (
    SurvivalCurve,
    WeightVector,
    cumulative_hazard_ratio,
    evaluate,
    nelson_aalen,
    rmst_difference,
    survival_difference,
)
from .sweep import SweepConfig, run_sweep

__version__ = "0.1.0"

__all__ = [
    "PatientRecord",
    "StratumProportions",
    "TrialDataset",
    "load_dataset",
    "responder_mask",
    "stratum_proportions",
    "write_dataset",
    "ConvergenceError",
    "DataError",
    "EstimationError",
    "ExtrapolationWarning",
    "MonotonicityWarning",
    "RankDeficiencyError",
    "SeparationError",
    "EstimateReport",
    "Method",
    "MethodSpec",
    "default_methods",
    "estimate",
    "estimate_many",
    "mea_control_curve",
    "mea_weights",
    "naive_control_curve",
    "ppr_control_curve",
    "summarize_hazard_ratio",
    "treatment_subgroup_curve",
    "wpp_control_curve",
    "SurvivalCurve",
    "WeightVector",
    "cumulative_hazard_ratio",
    "evaluate",
    "nelson_aalen",
    "rmst_difference",
    "survival_difference",
    "BootstrapConfig",
    "IntervalEstimate",
    "bootstrap_estimate",
    "bootstrap_methods",
    "CoxModel",
    "average_predicted_curve",
    "fit_cox",
    "predict_survival",
    "LogisticModel",
    "fit_logistic",
    "predict_probability",
    "ScenarioConfig",
    "TruthReport",
    "default_scenario",
    "simulate_trial",
    "true_subgroup_curves",
    "SweepConfig",
    "run_sweep",
]
