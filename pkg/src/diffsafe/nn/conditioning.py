"""Conditioning vectors: normalized observation history plus optional action history."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

STATE_DIM = 5
ACTION_DIM = 3
POSITION_SLICE = slice(0, 2)  # (x, y) inside the state vector


@dataclass(frozen=True)
class NormStats:
    """Per-dimension mean/std for states and actions, computed from a dataset."""

    state_mean: np.ndarray
    state_std: np.ndarray
    action_mean: np.ndarray
    action_std: np.ndarray

    def __post_init__(self) -> None:
        for name in ("state_std", "action_std"):
            if np.any(getattr(self, name) <= 0):
                raise ValueError(f"{name} must be > 0 in every dimension")

    def normalize_states(self, states: np.ndarray) -> np.ndarray:
        return (states - self.state_mean) / self.state_std

    def normalize_actions(self, actions: np.ndarray) -> np.ndarray:
        return (actions - self.action_mean) / self.action_std

    def denormalize_actions(self, actions: np.ndarray) -> np.ndarray:
        return actions * self.action_std + self.action_mean

    def to_dict(self) -> dict:
        return {
            "state_mean": self.state_mean.tolist(),
            "state_std": self.state_std.tolist(),
            "action_mean": self.action_mean.tolist(),
            "action_std": self.action_std.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(
            state_mean=np.array(d["state_mean"], dtype=np.float64),
            state_std=np.array(d["state_std"], dtype=np.float64),
            action_mean=np.array(d["action_mean"], dtype=np.float64),
            action_std=np.array(d["action_std"], dtype=np.float64),
        )


@dataclass(frozen=True)
class CondLayout:
    """Shape and masking contract of a conditioning vector.

    The vector is t_obs per-step blocks of [state(5) | latent(d_z)], followed by
    t_obs action rows when `include_actions` is set. Masked blocks (position,
    visual) keep their slots and are zeroed, so ablations never change the
    network input width.
    """

    t_obs: int
    latent_dim: int
    include_actions: bool
    include_position: bool = True
    include_visual: bool = True

    @property
    def obs_step_dim(self) -> int:
        return STATE_DIM + self.latent_dim

    @property
    def dim(self) -> int:
        d = self.t_obs * self.obs_step_dim
        if self.include_actions:
            d += self.t_obs * ACTION_DIM
        return d

    def without(self, *, position: bool = False, visual: bool = False, actions: bool = False) -> "CondLayout":
        out = self
        if position:
            out = replace(out, include_position=False)
        if visual:
            out = replace(out, include_visual=False)
        if actions:
            out = replace(out, include_actions=False)
        return out

    def to_dict(self) -> dict:
        return {
            "t_obs": self.t_obs,
            "latent_dim": self.latent_dim,
            "include_actions": self.include_actions,
            "include_position": self.include_position,
            "include_visual": self.include_visual,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CondLayout":
        return cls(**d)


@dataclass(frozen=True)
class ConditioningVector:
    values: np.ndarray
    layout: CondLayout

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.layout.dim,):
            raise ValueError(f"conditioning length {v.shape} does not match layout dim {self.layout.dim}")
        if not np.all(np.isfinite(v)):
            raise ValueError("conditioning vector contains non-finite entries")
        object.__setattr__(self, "values", v)


def build_conditioning(
    states: np.ndarray,
    latents: np.ndarray,
    actions: np.ndarray | None,
    norm: NormStats,
    layout: CondLayout,
) -> ConditioningVector:
    """Assemble one conditioning vector from raw (unnormalized) history arrays.

    `states` is (t_obs, 5), `latents` is (t_obs, d_z) and `actions`, required
    iff the layout includes them, is (t_obs, 3).
    """
    values = build_conditioning_batch(states[None], latents[None], None if actions is None else actions[None], norm, layout)[0]
    return ConditioningVector(values=values, layout=layout)


def build_conditioning_batch(
    states: np.ndarray,
    latents: np.ndarray,
    actions: np.ndarray | None,
    norm: NormStats,
    layout: CondLayout,
) -> np.ndarray:
    """Vectorized builder over a batch: states (B, t_obs, 5) -> (B, layout.dim)."""
    states = np.asarray(states, dtype=np.float64)
    latents = np.asarray(latents, dtype=np.float64)
    b, t_obs, sd = states.shape
    if t_obs != layout.t_obs or sd != STATE_DIM:
        raise ValueError(f"states shape {states.shape} does not match layout (t_obs={layout.t_obs})")
    if latents.shape != (b, t_obs, layout.latent_dim):
        raise ValueError(f"latents shape {latents.shape} does not match layout d_z={layout.latent_dim}")
    ns = norm.normalize_states(states)
    if not layout.include_position:
        ns = ns.copy()
        ns[:, :, POSITION_SLICE] = 0.0
    lz = np.zeros_like(latents) if not layout.include_visual else latents
    obs = np.concatenate([ns, lz], axis=2).reshape(b, -1)
    if layout.include_actions:
        if actions is None:
            raise ValueError("layout includes actions but none were given")
        actions = np.asarray(actions, dtype=np.float64)
        if actions.shape != (b, t_obs, ACTION_DIM):
            raise ValueError(f"actions shape {actions.shape} does not match layout")
        na = norm.normalize_actions(actions).reshape(b, -1)
        return np.concatenate([obs, na], axis=1)
    if actions is not None:
        raise ValueError("layout excludes actions but actions were given")
    return obs
