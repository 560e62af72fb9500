"""Deterministic 2D driving world: tracks, car dynamics, safety predicates, rasters."""

from .dynamics import step_dynamics
from .raster import RasterPatch, local_raster, raster_from_bytes, raster_to_bytes
from .track import (
    Obstacle,
    Track,
    TrackParamError,
    TrackParams,
    collision,
    generate_track,
    load_track,
    off_road,
    save_track,
    track_from_dict,
    track_progress,
    track_to_dict,
)
from .types import Action, CarState, SimConfig

__all__ = [
    "Action",
    "CarState",
    "SimConfig",
    "Obstacle",
    "Track",
    "TrackParamError",
    "TrackParams",
    "RasterPatch",
    "generate_track",
    "step_dynamics",
    "off_road",
    "collision",
    "local_raster",
    "raster_to_bytes",
    "raster_from_bytes",
    "track_progress",
    "track_to_dict",
    "track_from_dict",
    "save_track",
    "load_track",
]
