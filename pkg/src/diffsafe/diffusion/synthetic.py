"""Synthetic fixtures: the bimodal-steering dataset used to test mode recovery."""

from __future__ import annotations

import numpy as np

from ..drivers.dataset import KIND_COPILOT, DemoDataset
from ..drivers.episodes import Episode
from ..sim.track import TrackParams


def make_bimodal_dataset(
    n_episodes: int = 40,
    steps: int = 60,
    d_z: int = 8,
    rng: np.random.Generator | None = None,
) -> DemoDataset:
    """Episodes whose steer is constantly +0.5 or -0.5 with equal mass.

    States are a tiny random walk (so normalization stats stay positive) and
    rasters/latents are zeros: the conditioning carries no mode information,
    which makes the target conditional distribution genuinely bimodal.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    episodes = []
    # one state trajectory shared by every episode: the conditioning carries no
    # clue about the steering mode, only the variance the stats need
    shared_states = (0.1 * rng.standard_normal((steps + 1, 5))).astype(np.float32)
    for i in range(n_episodes):
        mode = 0.5 if i % 2 == 0 else -0.5
        actions = np.zeros((steps, 3), dtype=np.float32)
        actions[:, 0] = mode
        actions[:, 1] = 0.3 + 0.05 * rng.standard_normal(steps)
        actions[:, 2] = np.abs(0.02 * rng.standard_normal(steps))
        states = shared_states.copy()
        rasters = np.zeros((steps, 2, 8, 8), dtype=np.float32)
        ep = Episode(
            states=states,
            actions=np.clip(actions, [-1, 0, 0], [1, 1, 1]),
            rasters=rasters,
            track_seed=0,
            driver_tag="expert",
            dt=0.1,
        )
        ep.latents = np.zeros((steps, d_z), dtype=np.float64)
        episodes.append(ep)
    # bimodal fixture bypasses the on-track safety ingest: states are abstract
    ds = DemoDataset(
        episodes=episodes,
        kind=KIND_COPILOT,
        norm=_stats_for(episodes),
        track_params=TrackParams(),
        car_radius=0.4,
    )
    return ds


def _stats_for(episodes):
    from ..drivers.dataset import compute_norm_stats

    return compute_norm_stats(episodes)
