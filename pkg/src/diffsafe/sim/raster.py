"""Car-centred occupancy rasters used as the policies' visual context."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .geometry import distance_to_polyline
from .track import Track
from .types import CarState

RASTER_CHANNELS = ("drivable", "obstacle")


@dataclass(frozen=True)
class RasterPatch:
    """Heading-aligned local grid: channel 0 = drivable, channel 1 = obstacle.

    `grid` has shape (2, H, W) with values in [0, 1]; row 0 is directly ahead
    of the car and columns sweep left to right.
    """

    grid: np.ndarray
    resolution: float

    def __post_init__(self) -> None:
        g = np.asarray(self.grid, dtype=np.float32)
        if g.ndim != 3 or g.shape[0] != len(RASTER_CHANNELS):
            raise ValueError("grid must have shape (2, H, W)")
        if g.min() < 0.0 or g.max() > 1.0:
            raise ValueError("grid values must lie in [0, 1]")
        object.__setattr__(self, "grid", g)


def local_raster(track: Track, state: CarState, size: int = 32, resolution: float = 0.5) -> RasterPatch:
    """Sample the drivable/obstacle channels at the car-frame cell centres.

    Cell (i, j) covers the point `f` metres ahead and `l` metres to the left of
    the car, with f = ((H-1)/2 - i) * res and l = ((W-1)/2 - j) * res, so the
    patch rotates with the car and flips 180 degrees when the heading does.
    """
    if size < 8:
        raise ValueError("raster size must be >= 8")
    h = w = size
    rows = (np.arange(h) - (h - 1) / 2.0) * -resolution  # forward offsets, row 0 at the front
    cols = (np.arange(w) - (w - 1) / 2.0) * -resolution  # leftward offsets, col 0 leftmost
    fwd, left = np.meshgrid(rows, cols, indexing="ij")

    cos_t = math.cos(state.theta)
    sin_t = math.sin(state.theta)
    px = state.x + fwd * cos_t - left * sin_t
    py = state.y + fwd * sin_t + left * cos_t
    pts = np.stack([px.ravel(), py.ravel()], axis=1)

    # Only segments that could be within half_width of a patch cell can affect
    # the drivable mask, so long centerlines get prefiltered by vertex distance.
    cl = track.centerline
    patch_radius = 0.5 * resolution * size * math.sqrt(2.0)
    reach = patch_radius + track.half_width + 2.0 * _max_segment_length(cl)
    near_vertex = np.hypot(cl[:, 0] - state.x, cl[:, 1] - state.y) <= reach
    near_seg = near_vertex[:-1] | near_vertex[1:]
    if near_seg.any():
        from .geometry import point_segment_distances

        dist = point_segment_distances(pts, cl[:-1][near_seg], cl[1:][near_seg]).min(axis=1)
    else:
        dist = distance_to_polyline(pts, cl)
    drivable = (dist < track.half_width).astype(np.float32).reshape(h, w)

    obstacle = np.zeros(h * w, dtype=np.float32)
    for ob in track.obstacles:
        inside = (pts[:, 0] - ob.x) ** 2 + (pts[:, 1] - ob.y) ** 2 <= ob.radius**2
        obstacle[inside] = 1.0
    obstacle = obstacle.reshape(h, w)

    return RasterPatch(grid=np.stack([drivable, obstacle], axis=0), resolution=resolution)


def _max_segment_length(poly: np.ndarray) -> float:
    d = np.diff(poly, axis=0)
    return float(np.hypot(d[:, 0], d[:, 1]).max())


_HEADER = struct.Struct("<4sIIIf")
_MAGIC = b"RAST"


def raster_to_bytes(patch: RasterPatch) -> bytes:
    """Row-major float32 export with an (H, W, channels, resolution) header."""
    c, h, w = patch.grid.shape
    header = _HEADER.pack(_MAGIC, h, w, c, patch.resolution)
    return header + patch.grid.astype("<f4").tobytes(order="C")


def raster_from_bytes(buf: bytes) -> RasterPatch:
    magic, h, w, c, res = _HEADER.unpack_from(buf, 0)
    if magic != _MAGIC:
        raise ValueError("not a raster blob")
    expected = _HEADER.size + 4 * h * w * c
    if len(buf) != expected:
        raise ValueError(f"truncated raster blob: {len(buf)} != {expected}")
    grid = np.frombuffer(buf, dtype="<f4", offset=_HEADER.size).reshape(c, h, w).copy()
    return RasterPatch(grid=grid, resolution=res)
