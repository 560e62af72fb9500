"""Demonstration datasets: safety ingest checks, normalization stats, disk format.

On disk a dataset is a directory holding `manifest.json` plus
`episodes/ep_%05d.bin`. Each .bin is raw little-endian float32 arrays in the
order declared by the manifest (states, actions, rasters).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..nn.conditioning import NormStats
from ..sim.track import Track, TrackParams, collision, generate_track, off_road
from ..sim.types import CarState
from .episodes import Episode

DATASET_FORMAT_VERSION = 1
KIND_EVAL = "eval"
KIND_COPILOT = "copilot"
ARRAY_ORDER = ("states", "actions", "rasters")


class DatasetError(ValueError):
    pass


def compute_norm_stats(episodes: list[Episode]) -> NormStats:
    states = np.concatenate([ep.states.astype(np.float64) for ep in episodes], axis=0)
    actions = np.concatenate([ep.actions.astype(np.float64) for ep in episodes], axis=0)
    return NormStats(
        state_mean=states.mean(axis=0),
        state_std=states.std(axis=0),
        action_mean=actions.mean(axis=0),
        action_std=actions.std(axis=0),
    )


def unsafe_steps(episode: Episode, track: Track, car_radius: float) -> list[int]:
    """Indices of states that are off-road or in collision."""
    bad = []
    for i, row in enumerate(episode.states.astype(np.float64)):
        s = CarState(x=row[0], y=row[1], vx=row[2], vy=row[3], theta=row[4])
        if off_road(track, s) or collision(track, s, car_radius):
            bad.append(i)
    return bad


@dataclass
class DemoDataset:
    episodes: list[Episode]
    kind: str
    norm: NormStats
    track_params: TrackParams
    car_radius: float

    @property
    def dt(self) -> float:
        return self.episodes[0].dt

    @classmethod
    def from_episodes(
        cls,
        episodes: list[Episode],
        kind: str,
        track_params: TrackParams,
        car_radius: float = 0.4,
        tracks: dict[int, Track] | None = None,
    ) -> "DemoDataset":
        if kind not in (KIND_EVAL, KIND_COPILOT):
            raise DatasetError(f"unknown dataset kind: {kind!r}")
        if not episodes:
            raise DatasetError("dataset needs at least one episode")
        dts = {ep.dt for ep in episodes}
        if len(dts) != 1:
            raise DatasetError(f"episodes disagree on dt: {sorted(dts)}")
        if kind == KIND_COPILOT:
            tracks = tracks or {}
            for idx, ep in enumerate(episodes):
                track = tracks.get(ep.track_seed)
                if track is None:
                    track = generate_track(ep.track_seed, track_params)
                    tracks[ep.track_seed] = track
                bad = unsafe_steps(ep, track, car_radius)
                if bad:
                    raise DatasetError(
                        f"copilot dataset rejects episode {idx}: unsafe steps at indices {bad[:5]}"
                    )
        return cls(
            episodes=episodes,
            kind=kind,
            norm=compute_norm_stats(episodes),
            track_params=track_params,
            car_radius=car_radius,
        )


def save_dataset(ds: DemoDataset, path: str | Path) -> None:
    root = Path(path)
    (root / "episodes").mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": DATASET_FORMAT_VERSION,
        "kind": ds.kind,
        "dt": ds.dt,
        "episode_count": len(ds.episodes),
        "array_order": list(ARRAY_ORDER),
        "raster_shape": list(ds.episodes[0].rasters.shape[1:]),
        "norm": ds.norm.to_dict(),
        "track_params": asdict(ds.track_params),
        "car_radius": ds.car_radius,
        "episodes": [
            {
                "file": f"episodes/ep_{i:05d}.bin",
                "steps": len(ep),
                "track_seed": ep.track_seed,
                "driver_tag": ep.driver_tag,
            }
            for i, ep in enumerate(ds.episodes)
        ],
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
    for i, ep in enumerate(ds.episodes):
        blobs = [ep.states, ep.actions, ep.rasters]
        with open(root / f"episodes/ep_{i:05d}.bin", "wb") as f:
            for arr in blobs:
                f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_dataset(path: str | Path) -> DemoDataset:
    root = Path(path)
    try:
        manifest = json.loads((root / "manifest.json").read_text())
    except FileNotFoundError as e:
        raise DatasetError(f"no manifest at {root}") from e
    if manifest.get("format_version") != DATASET_FORMAT_VERSION:
        raise DatasetError(f"unsupported dataset format version: {manifest.get('format_version')}")
    if manifest.get("array_order") != list(ARRAY_ORDER):
        raise DatasetError(f"unexpected array order: {manifest.get('array_order')}")
    c, h, w = manifest["raster_shape"]
    dt = float(manifest["dt"])
    episodes: list[Episode] = []
    for entry in manifest["episodes"]:
        steps = int(entry["steps"])
        raw = (root / entry["file"]).read_bytes()
        sizes = [(steps + 1) * 5, steps * 3, steps * c * h * w]
        if len(raw) != 4 * sum(sizes):
            raise DatasetError(f"truncated episode file {entry['file']}: {len(raw)} bytes")
        flat = np.frombuffer(raw, dtype="<f4")
        o0, o1 = sizes[0], sizes[0] + sizes[1]
        episodes.append(
            Episode(
                states=flat[:o0].reshape(steps + 1, 5).copy(),
                actions=flat[o0:o1].reshape(steps, 3).copy(),
                rasters=flat[o1:].reshape(steps, c, h, w).copy(),
                track_seed=int(entry["track_seed"]),
                driver_tag=entry["driver_tag"],
                dt=dt,
            )
        )
    ds = DemoDataset.from_episodes(
        episodes,
        kind=manifest["kind"],
        track_params=TrackParams(**manifest["track_params"]),
        car_radius=float(manifest["car_radius"]),
    )
    stored = NormStats.from_dict(manifest["norm"])
    for name in ("state_mean", "state_std", "action_mean", "action_std"):
        if not np.allclose(getattr(ds.norm, name), getattr(stored, name), rtol=0, atol=0):
            raise DatasetError(f"stored normalization stats disagree with recomputed {name}")
    return ds
