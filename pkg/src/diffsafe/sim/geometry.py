"""Planar geometry helpers shared by the track, raster, and driver code."""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = a % TWO_PI
    if w > math.pi:
        w -= TWO_PI
    return w


def wrap_angle_array(a: np.ndarray) -> np.ndarray:
    w = np.mod(a, TWO_PI)
    w[w > math.pi] -= TWO_PI
    return w


def polyline_lengths(points: np.ndarray) -> np.ndarray:
    """Per-segment lengths of an open polyline given as (N, 2)."""
    d = np.diff(points, axis=0)
    return np.hypot(d[:, 0], d[:, 1])


def cumulative_arclength(points: np.ndarray) -> np.ndarray:
    """Cumulative arclength (N,) with s[0] = 0."""
    s = np.zeros(len(points))
    s[1:] = np.cumsum(polyline_lengths(points))
    return s


def point_segment_distances(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from points p (M, 2) to segments a->b (N, 2) as an (M, N) matrix."""
    ab = b - a  # (N, 2)
    ap = p[:, None, :] - a[None, :, :]  # (M, N, 2)
    denom = np.einsum("nd,nd->n", ab, ab)
    denom = np.where(denom < 1e-18, 1.0, denom)
    t = np.einsum("mnd,nd->mn", ap, ab) / denom[None, :]
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    diff = p[:, None, :] - closest
    return np.hypot(diff[:, :, 0], diff[:, :, 1])


def distance_to_polyline(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Min distance from each point (M, 2) to a polyline with vertices (N, 2)."""
    pts = np.atleast_2d(points)
    d = point_segment_distances(pts, poly[:-1], poly[1:])
    return d.min(axis=1)


def nearest_on_polyline(point: np.ndarray, poly: np.ndarray, arclen: np.ndarray) -> tuple[float, float, int]:
    """Nearest point on an open polyline.

    Returns (distance, arclength of the projection, segment index).
    `arclen` must be the cumulative arclength of `poly`.
    """
    a = poly[:-1]
    b = poly[1:]
    ab = b - a
    denom = np.einsum("nd,nd->n", ab, ab)
    denom = np.where(denom < 1e-18, 1.0, denom)
    ap = point[None, :] - a
    t = np.clip(np.einsum("nd,nd->n", ap, ab) / denom, 0.0, 1.0)
    closest = a + t[:, None] * ab
    diff = point[None, :] - closest
    dist = np.hypot(diff[:, 0], diff[:, 1])
    i = int(np.argmin(dist))
    seg_len = math.sqrt(denom[i]) if denom[i] > 1e-18 else 0.0
    s = float(arclen[i] + t[i] * seg_len)
    return float(dist[i]), s, i


def point_at_arclength(poly: np.ndarray, arclen: np.ndarray, s: float) -> np.ndarray:
    """Interpolated point at arclength s on a closed polyline (s wraps at total length)."""
    total = float(arclen[-1])
    s = s % total
    i = int(np.searchsorted(arclen, s, side="right")) - 1
    i = min(max(i, 0), len(poly) - 2)
    seg = arclen[i + 1] - arclen[i]
    t = 0.0 if seg <= 0 else (s - arclen[i]) / seg
    return poly[i] + t * (poly[i + 1] - poly[i])


def tangent_at_arclength(poly: np.ndarray, arclen: np.ndarray, s: float) -> np.ndarray:
    """Unit tangent of the segment containing arclength s."""
    total = float(arclen[-1])
    s = s % total
    i = int(np.searchsorted(arclen, s, side="right")) - 1
    i = min(max(i, 0), len(poly) - 2)
    d = poly[i + 1] - poly[i]
    n = math.hypot(d[0], d[1])
    if n < 1e-12:
        return np.array([1.0, 0.0])
    return d / n


def menger_curvature(prev_pt: np.ndarray, pt: np.ndarray, next_pt: np.ndarray) -> float:
    """Signed curvature through three consecutive points (positive = turning left/CCW)."""
    area2 = (pt[0] - prev_pt[0]) * (next_pt[1] - prev_pt[1]) - (next_pt[0] - prev_pt[0]) * (pt[1] - prev_pt[1])
    a = math.hypot(pt[0] - prev_pt[0], pt[1] - prev_pt[1])
    b = math.hypot(next_pt[0] - pt[0], next_pt[1] - pt[1])
    c = math.hypot(next_pt[0] - prev_pt[0], next_pt[1] - prev_pt[1])
    denom = a * b * c
    if denom < 1e-12:
        return 0.0
    return 2.0 * area2 / denom


def closed_polyline_curvature(poly: np.ndarray, smooth_window: int = 5) -> np.ndarray:
    """Per-vertex signed curvature of a closed polyline (first == last vertex).

    Curvature is estimated from consecutive vertex triples and box-smoothed.
    Returned array has one entry per vertex except the duplicated closing one.
    """
    ring = poly[:-1]
    n = len(ring)
    kappa = np.empty(n)
    for i in range(n):
        kappa[i] = menger_curvature(ring[(i - 1) % n], ring[i], ring[(i + 1) % n])
    if smooth_window > 1:
        w = smooth_window
        padded = np.concatenate([kappa[-w:], kappa, kappa[:w]])
        kernel = np.ones(2 * w + 1) / (2 * w + 1)
        kappa = np.convolve(padded, kernel, mode="same")[w:-w]
    return kappa
