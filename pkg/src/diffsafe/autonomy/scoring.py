"""Similarity scoring of predicted human action sequences under the copilot.

The score is a multi-step denoising residual: corrupt the sequence to a fixed
grid of diffusion steps, ask the copilot denoiser for the noise, and average
the normalized squared residuals. It is proportional to the training objective
(the likelihood bound), which makes it a computable stand-in for the exact
model likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..diffusion.policy import ActionSequence, PolicyHead, fit_length
from ..drivers.dataset import DemoDataset
from ..nn import ConditioningVector, build_conditioning_batch, denoise_predict_batch
from ..diffusion.training import WindowIndex

SCORE_GRID_FRACTIONS = (0.25, 0.5, 0.75)
SCORE_DRAWS_PER_STEP = 8


@dataclass(frozen=True)
class SimilarityScore:
    """Nonnegative scalar; `value` is the mean of the per-(step, draw) components."""

    value: float
    components: np.ndarray

    def __post_init__(self) -> None:
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError(f"score must be finite and >= 0, got {self.value}")


def _score_grid(K: int) -> list[int]:
    return [math.ceil(f * K) for f in SCORE_GRID_FRACTIONS]


def nll_score(
    a_pred: ActionSequence,
    copilot: PolicyHead,
    cond: ConditioningVector,
    rng: np.random.Generator,
) -> SimilarityScore:
    """Score a predicted human sequence against the copilot's learned distribution."""
    if cond.layout != copilot.layout:
        raise ValueError("conditioning layout does not match the copilot policy")
    values = fit_length(a_pred.values, copilot.t_pred)
    if a_pred.space == "raw":
        values = copilot.norm.normalize_actions(values)
    sch = copilot.schedule
    t_pred = copilot.t_pred
    denom = t_pred * 3
    components = []
    cond_b = np.repeat(cond.values[None], SCORE_DRAWS_PER_STEP, axis=0)
    for k in _score_grid(sch.K):
        eps = rng.standard_normal((SCORE_DRAWS_PER_STEP, t_pred, 3))
        x_k = sch.sqrt_alpha_bar[k] * values[None] + sch.sqrt_one_minus_alpha_bar[k] * eps
        eps_hat = denoise_predict_batch(copilot.weights, x_k, np.full(SCORE_DRAWS_PER_STEP, k), cond_b)
        res = np.sum((eps - eps_hat) ** 2, axis=(1, 2)) / denom
        components.extend(res.tolist())
    components = np.array(components)
    return SimilarityScore(value=float(components.mean()), components=components)


def nll_score_multi(
    predictions: list[ActionSequence],
    copilot: PolicyHead,
    cond: ConditioningVector,
    rng: np.random.Generator,
) -> SimilarityScore:
    """Score several predicted futures; the trigger statistic is the best draw.

    A typical human's predictive distribution legitimately contains some
    off-manifold futures (occasional lapses are in the training data), so the
    mean over draws is noisy. The minimum asks whether even the most
    copilot-like predicted future is anomalous, which stays low in normal
    driving and high once every prediction continues a lapse. The per-draw
    residuals are computed in one batched pass and the winning draw's
    components are returned, so `value == mean(components)` still holds.
    """
    if not predictions:
        raise ValueError("need at least one predicted sequence")
    if cond.layout != copilot.layout:
        raise ValueError("conditioning layout does not match the copilot policy")
    sch = copilot.schedule
    t_pred = copilot.t_pred
    denom = t_pred * 3
    seqs = []
    for p in predictions:
        values = fit_length(p.values, t_pred)
        seqs.append(copilot.norm.normalize_actions(values) if p.space == "raw" else values)
    stacked = np.stack(seqs)  # (n, t_pred, 3)
    n = len(stacked)
    grid = _score_grid(sch.K)
    per_draw = np.zeros((n, len(grid) * SCORE_DRAWS_PER_STEP))
    for gi, k in enumerate(grid):
        eps = rng.standard_normal((n, SCORE_DRAWS_PER_STEP, t_pred, 3))
        x_k = sch.sqrt_alpha_bar[k] * stacked[:, None] + sch.sqrt_one_minus_alpha_bar[k] * eps
        flat = x_k.reshape(n * SCORE_DRAWS_PER_STEP, t_pred, 3)
        cond_b = np.repeat(cond.values[None], len(flat), axis=0)
        eps_hat = denoise_predict_batch(copilot.weights, flat, np.full(len(flat), k), cond_b)
        diff = eps - eps_hat.reshape(n, SCORE_DRAWS_PER_STEP, t_pred, 3)
        res = np.sum(diff**2, axis=(2, 3)) / denom
        per_draw[:, gi * SCORE_DRAWS_PER_STEP : (gi + 1) * SCORE_DRAWS_PER_STEP] = res
    best = int(np.argmin(per_draw.mean(axis=1)))
    components = per_draw[best]
    return SimilarityScore(value=float(components.mean()), components=components)


def calibrate_threshold(
    copilot: PolicyHead,
    validation: DemoDataset,
    percentile: float = 99.0,
    seed: int = 0,
) -> float:
    """Percentile of scores over every validation window of actual expert futures.

    Each window gets its own deterministic rng substream so the result does not
    depend on iteration order.
    """
    if not validation.episodes:
        raise ValueError("validation dataset is empty")
    values = scores_over_windows(copilot, validation, seed)
    return float(np.percentile(values, percentile))


def scores_over_windows(copilot: PolicyHead, dataset: DemoDataset, seed: int = 0) -> np.ndarray:
    """nll_score of the true future action slice for every window in the dataset."""
    index = WindowIndex(dataset, copilot.t_obs, copilot.t_pred)
    values = np.empty(len(index))
    for i in range(len(index)):
        states, latents, _, future = index.gather(np.array([i]), include_actions=False)
        cond_vals = build_conditioning_batch(states, latents, None, copilot.norm, copilot.layout)[0]
        cond = ConditioningVector(values=cond_vals, layout=copilot.layout)
        seq = ActionSequence(values=future[0], space="raw")
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        values[i] = nll_score(seq, copilot, cond, rng).value
    return values
