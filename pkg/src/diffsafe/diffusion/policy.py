"""Conditional action-sequence policies: sampling, partial diffusion, checkpoints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import (
    ArchDescriptor,
    CondLayout,
    ConditioningVector,
    DenoiserWeights,
    NormStats,
    denoise_predict_batch,
    load_checkpoint,
    save_checkpoint,
)
from .schedule import NoiseSchedule, cosine_schedule, forward_corrupt, reverse_step

ROLE_EVALUATOR = "evaluator"
ROLE_COPILOT = "copilot"

# raw action bounds per channel: steer, throttle, brake
ACTION_LOW = np.array([-1.0, 0.0, 0.0])
ACTION_HIGH = np.array([1.0, 1.0, 1.0])


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ActionSequence:
    """A (t_pred, 3) matrix of actions, tagged as raw or normalized space."""

    values: np.ndarray
    space: str  # "raw" | "normalized"

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"action sequence must be (t_pred, 3), got {v.shape}")
        if self.space not in ("raw", "normalized"):
            raise ValueError(f"unknown space: {self.space}")
        if self.space == "raw":
            if np.any(v < ACTION_LOW - 1e-12) or np.any(v > ACTION_HIGH + 1e-12):
                raise ValueError("raw action sequence violates channel bounds")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)


def forward_diffuse(x0: ActionSequence, k: int, noise: np.ndarray, sch: NoiseSchedule) -> ActionSequence:
    """Corrupt a normalized-space sequence with the closed-form jump to step k."""
    if x0.space != "normalized":
        raise ValueError("forward diffusion operates in normalized action space")
    return ActionSequence(values=forward_corrupt(x0.values, k, noise, sch), space="normalized")


def fit_length(values: np.ndarray, t_pred: int) -> np.ndarray:
    """Truncate, or pad by holding the last row, to exactly t_pred rows."""
    if len(values) == 0:
        raise ValueError("cannot fit an empty sequence")
    if len(values) >= t_pred:
        return values[:t_pred].copy()
    pad = np.repeat(values[-1:], t_pred - len(values), axis=0)
    return np.concatenate([values, pad], axis=0)


@dataclass
class PolicyHead:
    """A denoiser plus everything needed to run it: schedule, horizons, layout, stats."""

    role: str
    weights: DenoiserWeights
    schedule: NoiseSchedule
    t_obs: int
    t_pred: int
    layout: CondLayout
    norm: NormStats

    def __post_init__(self) -> None:
        if self.role not in (ROLE_EVALUATOR, ROLE_COPILOT):
            raise ValueError(f"unknown policy role: {self.role}")
        if self.t_obs <= 0 or self.t_pred <= 0:
            raise ValueError("horizons must be positive")
        d = self.weights.descriptor
        if d.t_pred != self.t_pred:
            raise ValueError(f"weights t_pred {d.t_pred} != policy t_pred {self.t_pred}")
        if d.kind in ("unet", "mlp") and d.cond_dim != self.layout.dim:
            raise ValueError(f"weights cond_dim {d.cond_dim} != layout dim {self.layout.dim}")
        if self.layout.t_obs != self.t_obs:
            raise ValueError("layout t_obs does not match policy t_obs")
        if self.role == ROLE_COPILOT and self.layout.include_actions:
            raise ValueError("copilot conditioning must not include action history")


DEFAULT_HORIZONS = {ROLE_EVALUATOR: (20, 30), ROLE_COPILOT: (10, 15)}


def _check_cond(policy: PolicyHead, cond: ConditioningVector) -> np.ndarray:
    if cond.layout != policy.layout:
        raise ValueError(f"conditioning layout {cond.layout} does not match policy layout {policy.layout}")
    return cond.values


def _reverse_chain(policy: PolicyHead, x: np.ndarray, k_start: int, cond_values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    sch = policy.schedule
    cond_b = cond_values[None]
    for k in range(k_start, 0, -1):
        eps_hat = denoise_predict_batch(policy.weights, x[None], np.array([k]), cond_b)[0]
        fresh = rng.standard_normal(x.shape) if k > 1 else None
        x = reverse_step(x, k, eps_hat, sch, fresh)
        if not np.all(np.isfinite(x)):
            raise SamplingError(f"non-finite sample at reverse step k={k}")
    return x


def _finalize_raw(policy: PolicyHead, x_norm: np.ndarray) -> ActionSequence:
    raw = policy.norm.denormalize_actions(x_norm)
    raw = np.clip(raw, ACTION_LOW, ACTION_HIGH)
    return ActionSequence(values=raw, space="raw")


def sample(policy: PolicyHead, cond: ConditioningVector, rng: np.random.Generator) -> ActionSequence:
    """Draw one action sequence: x_K ~ N(0, I), K reverse steps, denormalize, clamp."""
    cond_values = _check_cond(policy, cond)
    x = rng.standard_normal((policy.t_pred, 3))
    x = _reverse_chain(policy, x, policy.schedule.K, cond_values, rng)
    return _finalize_raw(policy, x)


def sample_batch(policy: PolicyHead, cond: ConditioningVector, rng: np.random.Generator, n: int) -> list[ActionSequence]:
    """n independent draws through one vectorized reverse chain (same conditioning)."""
    cond_values = _check_cond(policy, cond)
    sch = policy.schedule
    x = rng.standard_normal((n, policy.t_pred, 3))
    cond_b = np.repeat(cond_values[None], n, axis=0)
    for k in range(sch.K, 0, -1):
        eps_hat = denoise_predict_batch(policy.weights, x, np.full(n, k), cond_b)
        fresh = rng.standard_normal(x.shape) if k > 1 else None
        x = reverse_step(x, k, eps_hat, sch, fresh)
        if not np.all(np.isfinite(x)):
            raise SamplingError(f"non-finite sample at reverse step k={k}")
    return [_finalize_raw(policy, xi) for xi in x]


def partial_diffuse(
    copilot: PolicyHead,
    a_h: ActionSequence,
    cond: ConditioningVector,
    forward_ratio: float,
    rng: np.random.Generator,
) -> ActionSequence:
    """Corrupt a human sequence k_tau = round(ratio * K) steps, then denoise it back.

    ratio 0 returns the input unchanged; ratio 1 ignores it entirely and draws
    a fresh prior sample, which makes the output distribution identical to
    `sample`.
    """
    if not 0.0 <= forward_ratio <= 1.0:
        raise ValueError(f"forward_ratio must be in [0, 1], got {forward_ratio}")
    cond_values = _check_cond(copilot, cond)
    values = fit_length(a_h.values, copilot.t_pred)
    if a_h.space == "raw":
        a_raw = np.clip(values, ACTION_LOW, ACTION_HIGH)
        a_norm = copilot.norm.normalize_actions(a_raw)
    else:
        a_raw = None
        a_norm = values

    k_tau = int(round(forward_ratio * copilot.schedule.K))
    if k_tau == 0:
        if a_h.space == "raw":
            return ActionSequence(values=values, space="raw")
        return ActionSequence(values=values, space="normalized")
    if forward_ratio >= 1.0:
        x = rng.standard_normal((copilot.t_pred, 3))
    else:
        x = forward_corrupt(a_norm, k_tau, rng.standard_normal(a_norm.shape), copilot.schedule)
    x = _reverse_chain(copilot, x, k_tau, cond_values, rng)
    return _finalize_raw(copilot, x)


def save_policy(path, policy: PolicyHead) -> None:
    meta = {
        "role": policy.role,
        "t_obs": policy.t_obs,
        "t_pred": policy.t_pred,
        "schedule": policy.schedule.to_dict(),
        "layout": policy.layout.to_dict(),
        "norm": policy.norm.to_dict(),
    }
    save_checkpoint(path, "policy", policy.weights.descriptor.to_dict(), policy.weights.params, meta)


def load_policy(path) -> PolicyHead:
    desc_dict, arrays, meta = load_checkpoint(path, expect_kind="policy")
    descriptor = ArchDescriptor.from_dict(desc_dict)
    sch_info = meta["schedule"]
    if sch_info.get("kind") != "cosine":
        raise ValueError(f"unknown schedule kind in checkpoint: {sch_info}")
    return PolicyHead(
        role=meta["role"],
        weights=DenoiserWeights(descriptor, arrays),
        schedule=cosine_schedule(int(sch_info["K"])),
        t_obs=int(meta["t_obs"]),
        t_pred=int(meta["t_pred"]),
        layout=CondLayout.from_dict(meta["layout"]),
        norm=NormStats.from_dict(meta["norm"]),
    )
