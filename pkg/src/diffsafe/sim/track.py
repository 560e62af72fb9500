"""Procedural closed tracks with disc obstacles, plus the safety predicates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import (
    cumulative_arclength,
    distance_to_polyline,
    nearest_on_polyline,
)
from .types import CarState

TRACK_SCHEMA_VERSION = 1


class TrackParamError(ValueError):
    """Raised for degenerate track-generation parameters."""


@dataclass(frozen=True)
class Obstacle:
    x: float
    y: float
    radius: float


@dataclass(frozen=True)
class TrackParams:
    """Knobs for procedural track generation.

    Control points sit on a circle of `base_radius` and are pushed radially by
    up to `radial_noise` (fraction of the radius, must stay below 0.5). The
    closed Catmull-Rom spline through them is resampled at `resample_step`
    arclength. Obstacles are discs dropped inside the corridor, always leaving
    at least `min_side_clearance` of free width on one side.
    """

    n_control: int = 12
    base_radius: float = 30.0
    radial_noise: float = 0.3
    half_width: float = 2.5
    n_obstacles: int = 3
    obstacle_radius_min: float = 0.5
    obstacle_radius_max: float = 0.8
    resample_step: float = 0.5
    min_side_clearance: float = 1.2
    min_obstacle_spacing: float = 24.0
    start_keepout: float = 8.0

    def validate(self) -> None:
        if self.n_control < 8:
            raise TrackParamError(f"n_control must be >= 8, got {self.n_control}")
        if not self.base_radius > 0:
            raise TrackParamError("base_radius must be > 0")
        if not 0.0 <= self.radial_noise < 0.5:
            raise TrackParamError(f"radial_noise must be in [0, 0.5), got {self.radial_noise}")
        if self.n_obstacles < 0:
            raise TrackParamError("n_obstacles must be >= 0")
        if not self.half_width > 0:
            raise TrackParamError("half_width must be > 0")
        if not 0 < self.obstacle_radius_min <= self.obstacle_radius_max:
            raise TrackParamError("obstacle radii must satisfy 0 < min <= max")
        if not self.resample_step > 0:
            raise TrackParamError("resample_step must be > 0")


@dataclass(frozen=True)
class Track:
    """Closed centerline polyline (first == last point), corridor width, obstacles."""

    centerline: np.ndarray  # (N, 2), closed
    half_width: float
    obstacles: tuple[Obstacle, ...]
    seed: int
    arclength: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        cl = np.asarray(self.centerline, dtype=np.float64)
        if cl.ndim != 2 or cl.shape[1] != 2 or len(cl) < 4:
            raise ValueError("centerline must be an (N, 2) array with N >= 4")
        if not np.allclose(cl[0], cl[-1], atol=1e-9):
            raise ValueError("centerline must be closed (first == last point)")
        seg = np.hypot(*(np.diff(cl, axis=0).T))
        if np.any(seg < 1e-9):
            raise ValueError("centerline has coincident consecutive points")
        object.__setattr__(self, "centerline", cl)
        object.__setattr__(self, "arclength", cumulative_arclength(cl))
        for i, ob in enumerate(self.obstacles):
            d = float(distance_to_polyline(np.array([[ob.x, ob.y]]), cl)[0])
            if d > self.half_width + 1e-9:
                raise ValueError(f"obstacle {i} lies outside the corridor (distance {d:.3f})")

    @property
    def total_length(self) -> float:
        return float(self.arclength[-1])


def _catmull_rom_closed(control: np.ndarray, samples_per_segment: int) -> np.ndarray:
    """Dense samples of the closed Catmull-Rom spline through `control` points."""
    n = len(control)
    out = []
    for i in range(n):
        p0 = control[(i - 1) % n]
        p1 = control[i]
        p2 = control[(i + 1) % n]
        p3 = control[(i + 2) % n]
        t = np.linspace(0.0, 1.0, samples_per_segment, endpoint=False)
        t2 = t * t
        t3 = t2 * t
        basis = (
            0.5 * (2 * p1[None, :])
            + 0.5 * (-p0 + p2)[None, :] * t[:, None]
            + 0.5 * (2 * p0 - 5 * p1 + 4 * p2 - p3)[None, :] * t2[:, None]
            + 0.5 * (-p0 + 3 * p1 - 3 * p2 + p3)[None, :] * t3[:, None]
        )
        out.append(basis)
    return np.concatenate(out, axis=0)


def _resample_closed(dense: np.ndarray, step: float) -> np.ndarray:
    """Resample a closed curve (last point not duplicated) at uniform arclength."""
    ring = np.concatenate([dense, dense[:1]], axis=0)
    s = cumulative_arclength(ring)
    total = float(s[-1])
    n_pts = max(8, int(round(total / step)))
    targets = np.linspace(0.0, total, n_pts, endpoint=False)
    idx = np.searchsorted(s, targets, side="right") - 1
    idx = np.clip(idx, 0, len(ring) - 2)
    seg = s[idx + 1] - s[idx]
    seg[seg <= 0] = 1.0
    t = (targets - s[idx]) / seg
    pts = ring[idx] + t[:, None] * (ring[idx + 1] - ring[idx])
    return np.concatenate([pts, pts[:1]], axis=0)


def _left_normal(tangent: np.ndarray) -> np.ndarray:
    return np.array([-tangent[1], tangent[0]])


def generate_track(seed: int, params: TrackParams = TrackParams()) -> Track:
    """Deterministically generate a closed track with obstacles from a seed."""
    params.validate()
    rng = np.random.default_rng(seed)

    angles = 2.0 * math.pi * np.arange(params.n_control) / params.n_control
    radii = params.base_radius * (1.0 + params.radial_noise * rng.uniform(-1.0, 1.0, params.n_control))
    control = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)

    dense = _catmull_rom_closed(control, samples_per_segment=40)
    centerline = _resample_closed(dense, params.resample_step)
    arclen = cumulative_arclength(centerline)
    total = float(arclen[-1])

    obstacles: list[Obstacle] = []
    placed_s: list[float] = []
    attempts = 0
    while len(obstacles) < params.n_obstacles and attempts < 200 * max(1, params.n_obstacles):
        attempts += 1
        s = float(rng.uniform(params.start_keepout, total - params.start_keepout))
        if any(min(abs(s - q), total - abs(s - q)) < params.min_obstacle_spacing for q in placed_s):
            continue
        r = float(rng.uniform(params.obstacle_radius_min, params.obstacle_radius_max))
        # lateral offset keeps the centre inside the corridor and one side passable
        d_max = params.half_width - 0.1
        d = float(rng.uniform(-d_max, d_max))
        gap_left = params.half_width - d - r
        gap_right = params.half_width + d - r
        if max(gap_left, gap_right) < params.min_side_clearance:
            continue
        i = min(int(np.searchsorted(arclen, s, side="right")) - 1, len(centerline) - 2)
        seg = centerline[i + 1] - centerline[i]
        seg_len = math.hypot(seg[0], seg[1])
        if seg_len < 1e-9:
            continue
        t = (s - arclen[i]) / seg_len
        base = centerline[i] + t * (centerline[i + 1] - centerline[i])
        normal = _left_normal(seg / seg_len)
        center = base + d * normal
        obstacles.append(Obstacle(float(center[0]), float(center[1]), r))
        placed_s.append(s)

    return Track(centerline=centerline, half_width=params.half_width, obstacles=tuple(obstacles), seed=seed)


def off_road(track: Track, state: CarState) -> bool:
    """True when the car centre sits at or beyond the corridor edge (closed condition)."""
    d = float(distance_to_polyline(np.array([[state.x, state.y]]), track.centerline)[0])
    return d >= track.half_width


def collision(track: Track, state: CarState, car_radius: float) -> bool:
    """True when the car disc touches or overlaps any obstacle disc (closed condition)."""
    if car_radius <= 0:
        raise ValueError("car_radius must be > 0")
    for ob in track.obstacles:
        if math.hypot(state.x - ob.x, state.y - ob.y) <= car_radius + ob.radius:
            return True
    return False


def track_progress(track: Track, state: CarState) -> tuple[float, float]:
    """(arclength of nearest centerline point, distance to it) for lap accounting."""
    d, s, _ = nearest_on_polyline(np.array([state.x, state.y]), track.centerline, track.arclength)
    return s, d


def track_to_dict(track: Track) -> dict:
    return {
        "version": TRACK_SCHEMA_VERSION,
        "seed": track.seed,
        "half_width": track.half_width,
        "centerline": [[float(x), float(y)] for x, y in track.centerline],
        "obstacles": [{"x": ob.x, "y": ob.y, "radius": ob.radius} for ob in track.obstacles],
    }


def track_from_dict(data: dict) -> Track:
    version = data.get("version")
    if version != TRACK_SCHEMA_VERSION:
        raise ValueError(f"unsupported track schema version: {version!r}")
    return Track(
        centerline=np.array(data["centerline"], dtype=np.float64),
        half_width=float(data["half_width"]),
        obstacles=tuple(Obstacle(o["x"], o["y"], o["radius"]) for o in data["obstacles"]),
        seed=int(data["seed"]),
    )


def save_track(track: Track, path: str | Path) -> None:
    Path(path).write_text(json.dumps(track_to_dict(track)))


def load_track(path: str | Path) -> Track:
    return track_from_dict(json.loads(Path(path).read_text()))
