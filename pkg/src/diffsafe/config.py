"""One validated configuration tree for every tunable in the stack."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .drivers.policies import ExpertConfig, HumanConfig
from .drivers.racing_line import RacingLineConfig
from .sim.track import TrackParams
from .sim.types import SimConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class HorizonsConfig:
    evaluator_obs: int = 20
    evaluator_pred: int = 30
    copilot_obs: int = 10
    copilot_pred: int = 15


@dataclass(frozen=True)
class NetConfig:
    kind: str = "unet"
    base_width: int = 32
    pe_dim: int = 32
    cond_embed_dim: int = 64
    mlp_width: int = 256
    mlp_layers: int = 3


@dataclass(frozen=True)
class TrainingConfig:
    ae_epochs: int = 20
    ae_hidden: int = 256
    policy_epochs: int = 40
    evaluator_epochs: int = 45
    batch_size: int = 64
    learning_rate: float = 1e-3
    ema_decay: float = 0.999
    max_windows_per_epoch: int | None = None
    evaluator_obs_dropout: float = 0.3


@dataclass(frozen=True)
class HandoverSettings:
    tau_nll: float | None = None  # filled in by calibration
    gamma0: float = 0.4
    ramp_steps: int = 4
    score_window: int = 3
    replan_interval: int = 8
    calibration_percentile: float = 99.5


@dataclass(frozen=True)
class DataConfig:
    n_tracks: int = 15
    episodes_per_track_copilot: int = 2
    episodes_per_track_eval: int = 2
    episode_horizon: int = 300
    noisy_expert_fraction: float = 0.5  # mild-noise episodes in the expert set
    noisy_expert_sigma: float = 0.05
    # off-line starts teach the copilot to rejoin the racing line
    recovery_episodes_per_track: int = 3
    recovery_horizon: int = 90
    recovery_offset_max: float = 1.7
    recovery_heading_error: float = 0.45
    recovery_speed: float = 3.0


@dataclass(frozen=True)
class RasterConfig:
    size: int = 32
    resolution: float = 0.5


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    schedule_steps: int = 50
    latent_dim: int = 32
    car_radius: float = 0.4
    sim: SimConfig = SimConfig()
    track: TrackParams = TrackParams()
    raster: RasterConfig = RasterConfig()
    horizons: HorizonsConfig = HorizonsConfig()
    net: NetConfig = NetConfig()
    training: TrainingConfig = TrainingConfig()
    handover: HandoverSettings = HandoverSettings()
    data: DataConfig = DataConfig()
    expert: ExpertConfig = ExpertConfig()
    human: HumanConfig = HumanConfig()


_NESTED = {
    "sim": SimConfig,
    "track": TrackParams,
    "raster": RasterConfig,
    "horizons": HorizonsConfig,
    "net": NetConfig,
    "training": TrainingConfig,
    "handover": HandoverSettings,
    "data": DataConfig,
    "expert": ExpertConfig,
    "human": HumanConfig,
    "line": RacingLineConfig,
}


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    allowed = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = allowed[name].type
        if isinstance(value, dict):
            nested_cls = _NESTED.get(name)
            if nested_cls is None:
                raise ConfigError(f"{path}.{name}: unexpected nested object")
            kwargs[name] = _build(nested_cls, value, f"{path}.{name}")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from e


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "config")


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {path}: {e}") from e
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2))
