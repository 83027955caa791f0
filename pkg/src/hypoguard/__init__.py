"""Rare-event estimation of overnight hypoglycemia under closed-loop
insulin control: data-driven scenario models, a fast ODE patient
simulator, and cross-entropy adaptive importance sampling."""

from .distributions import (
    GaussianMeanFamily,
    LogitNormal,
    ce_projection_update,
    fit_logit_normal,
    graphical_lasso,
    logit,
    sigmoid,
)
from .experiments import (
    CEConfig,
    ComparisonReport,
    run_comparison,
    run_synthetic_validation,
)
from .population import (
    BehaviorRecord,
    PatientProfile,
    ScenarioModel,
    build_patient_model,
    build_scenario_model,
    fit_behavior_model,
    load_behavior_csv,
    load_patient_json,
    sample_scenario,
)
from .rare_event import (
    CEState,
    Estimate,
    cross_entropy_train,
    event_count_comparison,
    is_estimate,
    mc_estimate,
)
from .simulator import (
    ControllerConfig,
    PhysParams,
    Rollout,
    ScenarioSample,
    SimConfig,
    risk,
    rollout,
    simulate_batch,
)

__version__ = "0.1.0"

__all__ = [
    "GaussianMeanFamily", "LogitNormal", "ce_projection_update",
    "fit_logit_normal", "graphical_lasso", "logit", "sigmoid",
    "CEConfig", "ComparisonReport", "run_comparison", "run_synthetic_validation",
    "BehaviorRecord", "PatientProfile", "ScenarioModel", "build_patient_model",
    "build_scenario_model", "fit_behavior_model", "load_behavior_csv",
    "load_patient_json", "sample_scenario",
    "CEState", "Estimate", "cross_entropy_train", "event_count_comparison",
    "is_estimate", "mc_estimate",
    "ControllerConfig", "PhysParams", "Rollout", "ScenarioSample", "SimConfig",
    "risk", "rollout", "simulate_batch",
]
