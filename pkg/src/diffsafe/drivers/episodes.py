"""Closed-loop episode recording."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..sim.dynamics import step_dynamics
from ..sim.geometry import tangent_at_arclength
from ..sim.raster import local_raster
from ..sim.track import Track
from ..sim.types import Action, CarState, SimConfig


class PartialEpisodeError(RuntimeError):
    """Raised when a rollout produces a non-finite state before the horizon."""


@dataclass
class Episode:
    """One recorded rollout: T+1 states, T actions, T rasters (one per pre-action state)."""

    states: np.ndarray  # (T+1, 5) float32
    actions: np.ndarray  # (T, 3) float32
    rasters: np.ndarray  # (T, 2, H, W) float32
    track_seed: int
    driver_tag: str
    dt: float
    latents: np.ndarray | None = None  # (T, d_z), attached after encoding

    def __post_init__(self) -> None:
        t = len(self.actions)
        if len(self.states) != t + 1:
            raise ValueError(f"states must have one trailing element: {len(self.states)} != {t} + 1")
        if len(self.rasters) != t:
            raise ValueError(f"rasters length {len(self.rasters)} != actions length {t}")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")

    def __len__(self) -> int:
        return len(self.actions)


def start_state(
    track: Track,
    start_arclength: float = 0.0,
    lateral_offset: float = 0.0,
    heading_error: float = 0.0,
    speed: float = 0.0,
) -> CarState:
    """Pose on (or laterally offset from) the centerline at a given arclength."""
    from ..sim.geometry import point_at_arclength

    p = point_at_arclength(track.centerline, track.arclength, start_arclength)
    t = tangent_at_arclength(track.centerline, track.arclength, start_arclength)
    normal = (-t[1], t[0])
    theta = math.atan2(t[1], t[0]) + heading_error
    return CarState(
        x=float(p[0] + lateral_offset * normal[0]),
        y=float(p[1] + lateral_offset * normal[1]),
        vx=speed * math.cos(theta),
        vy=speed * math.sin(theta),
        theta=theta,
    )


def record_episode(
    driver,
    track: Track,
    horizon: int,
    cfg: SimConfig,
    raster_size: int = 32,
    raster_resolution: float = 0.5,
    start_arclength: float = 0.0,
    initial_state: CarState | None = None,
) -> Episode:
    """Roll the driver closed-loop for `horizon` steps, recording everything."""
    state = initial_state if initial_state is not None else start_state(track, start_arclength)
    states = np.empty((horizon + 1, 5), dtype=np.float32)
    actions = np.empty((horizon, 3), dtype=np.float32)
    rasters = np.empty((horizon, 2, raster_size, raster_size), dtype=np.float32)
    states[0] = state.as_array()
    for t in range(horizon):
        rasters[t] = local_raster(track, state, size=raster_size, resolution=raster_resolution).grid
        action = driver.act(track, state)
        actions[t] = action.as_tuple()
        state = step_dynamics(state, action, cfg)
        if not all(math.isfinite(v) for v in state.as_array()):
            raise PartialEpisodeError(f"non-finite state at step {t}")
        states[t + 1] = state.as_array()
    return Episode(
        states=states,
        actions=actions,
        rasters=rasters,
        track_seed=track.seed,
        driver_tag=driver.tag,
        dt=cfg.dt,
    )
