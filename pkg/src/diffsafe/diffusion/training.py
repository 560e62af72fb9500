"""ELBO-style training of the conditional policies on demonstration windows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..drivers.dataset import KIND_COPILOT, KIND_EVAL, DemoDataset
from ..nn import (
    AdamHyperparams,
    AdamState,
    DenoiserWeights,
    build_conditioning_batch,
    loss_and_grads,
    optimizer_step,
)
from .policy import ROLE_COPILOT, ROLE_EVALUATOR, PolicyHead

_ROLE_TO_KIND = {ROLE_EVALUATOR: KIND_EVAL, ROLE_COPILOT: KIND_COPILOT}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    hp: AdamHyperparams = AdamHyperparams(lr=1e-3)
    max_windows_per_epoch: int | None = None
    ema_decay: float | None = 0.999  # averaged weights are what gets returned
    # probability of zeroing the observation block of a training sample's
    # conditioning; forces an action-history-bearing layout to actually use it
    obs_dropout: float = 0.0


class WindowIndex:
    """Flat view of every (episode, t) training window in a dataset.

    A window at time t conditions on states/latents over [t - t_obs + 1, t]
    and, for the evaluator, on actions over [t - t_obs, t - 1]; the regression
    target is the action slice [t, t + t_pred).
    """

    def __init__(self, dataset: DemoDataset, t_obs: int, t_pred: int):
        self.dataset = dataset
        self.t_obs = t_obs
        self.t_pred = t_pred
        items: list[tuple[int, int]] = []
        for ep_idx, ep in enumerate(dataset.episodes):
            if ep.latents is None:
                raise ValueError("episodes must carry latents; run encode_dataset_latents first")
            for t in range(t_obs, len(ep) - t_pred + 1):
                items.append((ep_idx, t))
        if not items:
            raise ValueError(
                f"dataset too short for horizons t_obs={t_obs}, t_pred={t_pred}"
            )
        self.items = np.array(items, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.items)

    def gather(self, idx: np.ndarray, include_actions: bool):
        """Stack (states, latents, action_history, future_actions) for window rows."""
        n = len(idx)
        t_obs, t_pred = self.t_obs, self.t_pred
        eps = self.dataset.episodes
        d_z = eps[0].latents.shape[1]
        states = np.empty((n, t_obs, 5))
        latents = np.empty((n, t_obs, d_z))
        hist = np.empty((n, t_obs, 3)) if include_actions else None
        future = np.empty((n, t_pred, 3))
        for row, (ep_idx, t) in enumerate(self.items[idx]):
            ep = eps[ep_idx]
            states[row] = ep.states[t - t_obs + 1 : t + 1]
            latents[row] = ep.latents[t - t_obs + 1 : t + 1]
            if include_actions:
                hist[row] = ep.actions[t - t_obs : t]
            future[row] = ep.actions[t : t + t_pred]
        return states, latents, hist, future


def train(
    policy: PolicyHead,
    dataset: DemoDataset,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple[PolicyHead, list[float]]:
    """Noise-prediction regression over dataset windows; returns the loss curve.

    Per step: draw a window batch, build conditioning, draw k ~ U[1, K] and
    unit noise per sample, corrupt the future action slice, regress the noise.
    """
    expected = _ROLE_TO_KIND[policy.role]
    if dataset.kind != expected:
        raise ValueError(f"{policy.role} policy expects a {expected!r} dataset, got {dataset.kind!r}")
    index = WindowIndex(dataset, policy.t_obs, policy.t_pred)
    sch = policy.schedule
    weights = policy.weights.copy()
    ema = {name: p.copy() for name, p in weights.params.items()} if cfg.ema_decay else None
    state = AdamState()
    curve: list[float] = []
    include_actions = policy.layout.include_actions
    n = len(index)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        if cfg.max_windows_per_epoch is not None:
            order = order[: cfg.max_windows_per_epoch]
        losses = []
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            states, latents, hist, future = index.gather(idx, include_actions)
            cond = build_conditioning_batch(states, latents, hist, policy.norm, policy.layout)
            if cfg.obs_dropout > 0.0 and include_actions:
                obs_dim = policy.layout.t_obs * policy.layout.obs_step_dim
                drop = rng.uniform(size=len(idx)) < cfg.obs_dropout
                cond[drop, :obs_dim] = 0.0
            x0 = policy.norm.normalize_actions(future)
            k = rng.integers(1, sch.K + 1, size=len(idx))
            eps = rng.standard_normal(x0.shape)
            loss, grads = loss_and_grads(weights, x0, k, eps, cond, sch.alpha_bar)
            weights.params, state = optimizer_step(weights.params, grads, state, cfg.hp)
            if ema is not None:
                d = cfg.ema_decay
                for name, p in weights.params.items():
                    ema[name] = d * ema[name] + (1.0 - d) * p
            losses.append(loss)
        curve.append(float(np.mean(losses)))
    final = DenoiserWeights(weights.descriptor, ema) if ema is not None else weights
    trained = PolicyHead(
        role=policy.role,
        weights=final,
        schedule=policy.schedule,
        t_obs=policy.t_obs,
        t_pred=policy.t_pred,
        layout=policy.layout,
        norm=policy.norm,
    )
    return trained, curve
