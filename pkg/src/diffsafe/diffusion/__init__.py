"""DDPM machinery: noise schedule, conditional sampling, partial diffusion, training."""

from .policy import (
    forward_diffuse,
    ACTION_HIGH,
    ACTION_LOW,
    DEFAULT_HORIZONS,
    ROLE_COPILOT,
    ROLE_EVALUATOR,
    ActionSequence,
    PolicyHead,
    SamplingError,
    fit_length,
    load_policy,
    partial_diffuse,
    sample,
    save_policy,
)
from .schedule import NoiseSchedule, cosine_schedule, forward_corrupt, reverse_step
from .synthetic import make_bimodal_dataset
from .training import TrainConfig, WindowIndex, train

__all__ = [
    "NoiseSchedule",
    "cosine_schedule",
    "forward_corrupt",
    "forward_diffuse",
    "reverse_step",
    "ActionSequence",
    "PolicyHead",
    "SamplingError",
    "ROLE_EVALUATOR",
    "ROLE_COPILOT",
    "DEFAULT_HORIZONS",
    "ACTION_LOW",
    "ACTION_HIGH",
    "fit_length",
    "sample",
    "partial_diffuse",
    "save_policy",
    "load_policy",
    "TrainConfig",
    "WindowIndex",
    "train",
    "make_bimodal_dataset",
]
