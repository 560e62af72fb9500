"""Obstacle-aware racing line: centerline plus smooth lateral offset bumps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..sim.geometry import (
    closed_polyline_curvature,
    cumulative_arclength,
    nearest_on_polyline,
    point_at_arclength,
    tangent_at_arclength,
)
from ..sim.track import Track


@dataclass(frozen=True)
class RacingLineConfig:
    car_radius: float = 0.4
    pass_margin: float = 0.5
    edge_margin: float = 0.3
    bump_half_length: float = 10.0
    curvature_smooth_window: int = 4


@dataclass(frozen=True)
class RacingLine:
    """Offset path around obstacles, with arclength and curvature lookups."""

    points: np.ndarray  # closed (N, 2)
    arclength: np.ndarray
    curvature: np.ndarray  # per vertex (N-1,)

    @property
    def total_length(self) -> float:
        return float(self.arclength[-1])

    def point_at(self, s: float) -> np.ndarray:
        return point_at_arclength(self.points, self.arclength, s)

    def tangent_at(self, s: float) -> np.ndarray:
        return tangent_at_arclength(self.points, self.arclength, s)

    def nearest(self, xy: np.ndarray) -> tuple[float, float]:
        d, s, _ = nearest_on_polyline(xy, self.points, self.arclength)
        return d, s

    def max_abs_curvature(self, s_from: float, window: float, n_samples: int = 8) -> float:
        total = self.total_length
        n = len(self.curvature)
        best = 0.0
        for q in np.linspace(0.0, window, n_samples):
            s = (s_from + q) % total
            i = min(int(np.searchsorted(self.arclength, s, side="right")) - 1, n - 1)
            best = max(best, abs(float(self.curvature[i])))
        return best


def _pass_side(track: Track, d_obs: float, radius: float, cfg: RacingLineConfig, tiebreak: int) -> float | None:
    """Signed lateral target for passing one obstacle, or None if boxed in."""
    hw = track.half_width
    need = radius + cfg.car_radius + cfg.pass_margin
    lat_limit = hw - cfg.car_radius - cfg.edge_margin
    left_target = d_obs + need
    right_target = d_obs - need
    left_ok = left_target <= lat_limit
    right_ok = right_target >= -lat_limit
    if left_ok and right_ok:
        gap_left = hw - d_obs - radius
        gap_right = hw + d_obs - radius
        if abs(gap_left - gap_right) < 0.3:
            return left_target if tiebreak % 2 == 0 else right_target
        return left_target if gap_left > gap_right else right_target
    if left_ok:
        return left_target
    if right_ok:
        return right_target
    return None


def build_racing_line(track: Track, cfg: RacingLineConfig = RacingLineConfig()) -> RacingLine:
    cl = track.centerline
    arclen = track.arclength
    total = float(arclen[-1])
    n = len(cl) - 1

    offsets = np.zeros(n)
    for idx, ob in enumerate(track.obstacles):
        d, s_o, seg = nearest_on_polyline(np.array([ob.x, ob.y]), cl, arclen)
        tangent = tangent_at_arclength(cl, arclen, s_o)
        normal = np.array([-tangent[1], tangent[0]])
        base = point_at_arclength(cl, arclen, s_o)
        d_signed = float(np.dot(np.array([ob.x, ob.y]) - base, normal))
        tiebreak = (track.seed * 2654435761 + idx) & 0xFFFFFFFF
        target = _pass_side(track, d_signed, ob.radius, cfg, tiebreak)
        if target is None:
            continue
        # raised-cosine bump centred on the obstacle arclength
        for i in range(n):
            ds = arclen[i] - s_o
            ds = (ds + total / 2) % total - total / 2
            u = ds / cfg.bump_half_length
            if abs(u) < 1.0:
                bump = target * (math.cos(math.pi * u / 2.0) ** 2)
                if abs(bump) > abs(offsets[i]):  # max-abs merge of overlapping bumps
                    offsets[i] = bump

    lat_limit = track.half_width - cfg.car_radius - cfg.edge_margin
    offsets = np.clip(offsets, -lat_limit, lat_limit)

    pts = np.empty_like(cl[:-1])
    for i in range(n):
        a = cl[i]
        b = cl[(i + 1) % n]
        t = b - a
        norm = math.hypot(t[0], t[1])
        normal = np.array([-t[1] / norm, t[0] / norm])
        pts[i] = a + offsets[i] * normal
    closed = np.concatenate([pts, pts[:1]], axis=0)
    kappa = closed_polyline_curvature(closed, smooth_window=cfg.curvature_smooth_window)
    return RacingLine(points=closed, arclength=cumulative_arclength(closed), curvature=kappa)
