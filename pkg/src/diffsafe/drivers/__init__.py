"""Scripted demonstrators, episode recording, and the demonstration dataset format."""

from .dataset import (
    KIND_COPILOT,
    KIND_EVAL,
    DatasetError,
    DemoDataset,
    compute_norm_stats,
    load_dataset,
    save_dataset,
    unsafe_steps,
)
from .episodes import Episode, PartialEpisodeError, record_episode, start_state
from .policies import (
    ExpertConfig,
    ExpertDriver,
    HumanConfig,
    HumanDriver,
    LapseState,
    expert_policy,
    human_policy,
)
from .racing_line import RacingLine, RacingLineConfig, build_racing_line

__all__ = [
    "Episode",
    "PartialEpisodeError",
    "record_episode",
    "start_state",
    "ExpertConfig",
    "ExpertDriver",
    "HumanConfig",
    "HumanDriver",
    "LapseState",
    "expert_policy",
    "human_policy",
    "RacingLine",
    "RacingLineConfig",
    "build_racing_line",
    "DemoDataset",
    "DatasetError",
    "KIND_EVAL",
    "KIND_COPILOT",
    "compute_norm_stats",
    "unsafe_steps",
    "save_dataset",
    "load_dataset",
]
