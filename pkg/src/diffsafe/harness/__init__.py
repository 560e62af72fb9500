"""Metrics, closed-loop benchmarks, and the ablation experiment runner."""

from .benchmark import (
    ObliviousDriver,
    ScriptedLapseDriver,
    StackArtifacts,
    blending_comparison,
    gamma0_sweep,
    handover_benchmark,
    make_head_on_track,
    run_head_on_trial,
    run_lapse_trial,
)
from .experiments import (
    CellSpec,
    ExperimentSpec,
    default_copilot_grid,
    default_evaluator_grid,
    report_table,
    run_experiment,
    save_report,
)
from .metrics import (
    RolloutSet,
    TrialRecord,
    f1_score,
    min_ade_k,
    min_aoe_k,
    safety_rates,
    smoothness,
    success_rate,
    unsafe_rate,
)
from .rollouts import classify_rollout, integrate_actions, prediction_rollout_set, timed_samples

__all__ = [
    "RolloutSet",
    "TrialRecord",
    "min_ade_k",
    "min_aoe_k",
    "f1_score",
    "safety_rates",
    "smoothness",
    "unsafe_rate",
    "success_rate",
    "integrate_actions",
    "classify_rollout",
    "prediction_rollout_set",
    "timed_samples",
    "StackArtifacts",
    "ScriptedLapseDriver",
    "ObliviousDriver",
    "run_lapse_trial",
    "handover_benchmark",
    "make_head_on_track",
    "run_head_on_trial",
    "blending_comparison",
    "gamma0_sweep",
    "CellSpec",
    "ExperimentSpec",
    "default_evaluator_grid",
    "default_copilot_grid",
    "run_experiment",
    "report_table",
    "save_report",
]
