"""Closed-loop shared autonomy: scoring, handover state machine, control loop."""

from .handover import (
    MODE_COPILOT,
    MODE_HUMAN,
    MODE_TRANSITIONING,
    HandoverConfig,
    HandoverState,
    blend_actions,
    handover_update,
    initial_handover_state,
)
from .loop import EXECUTOR_BLEND, EXECUTOR_PARTIAL, ControlLoop, LoopConfig, StepRecord
from .scoring import (
    SCORE_DRAWS_PER_STEP,
    SCORE_GRID_FRACTIONS,
    SimilarityScore,
    calibrate_threshold,
    nll_score,
    nll_score_multi,
    scores_over_windows,
)

__all__ = [
    "SimilarityScore",
    "nll_score",
    "nll_score_multi",
    "calibrate_threshold",
    "scores_over_windows",
    "SCORE_GRID_FRACTIONS",
    "SCORE_DRAWS_PER_STEP",
    "HandoverConfig",
    "HandoverState",
    "handover_update",
    "initial_handover_state",
    "blend_actions",
    "MODE_HUMAN",
    "MODE_TRANSITIONING",
    "MODE_COPILOT",
    "ControlLoop",
    "LoopConfig",
    "StepRecord",
    "EXECUTOR_PARTIAL",
    "EXECUTOR_BLEND",
]
