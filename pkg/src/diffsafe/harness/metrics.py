"""Trajectory-prediction and handover metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..sim.geometry import wrap_angle_array


@dataclass(frozen=True)
class RolloutSet:
    """K candidate pose rollouts against one ground-truth trajectory.

    Poses are (T, 3) arrays of (x, y, theta); all candidates share the horizon
    and the start state of the ground truth.
    """

    rollouts: tuple[np.ndarray, ...]
    ground_truth: np.ndarray
    track_seed: int = 0
    t_index: int = 0

    def __post_init__(self) -> None:
        if not self.rollouts:
            raise ValueError("rollout set is empty")
        gt = np.asarray(self.ground_truth, dtype=np.float64)
        for r in self.rollouts:
            if r.shape != gt.shape:
                raise ValueError(f"rollout shape {r.shape} != ground truth {gt.shape}")

    @property
    def k(self) -> int:
        return len(self.rollouts)


def min_ade_k(rollouts: RolloutSet) -> float:
    """Min over candidates of the mean Euclidean displacement from ground truth."""
    gt = rollouts.ground_truth
    best = np.inf
    for r in rollouts.rollouts:
        d = np.hypot(r[:, 0] - gt[:, 0], r[:, 1] - gt[:, 1]).mean()
        best = min(best, float(d))
    return best


def min_aoe_k(rollouts: RolloutSet) -> float:
    """Min over candidates of the mean wrapped absolute heading error."""
    gt = rollouts.ground_truth
    best = np.inf
    for r in rollouts.rollouts:
        err = np.abs(wrap_angle_array(r[:, 2] - gt[:, 2])).mean()
        best = min(best, float(err))
    return best


def f1_score(predictions: list[bool], labels: list[bool]) -> float:
    """Harmonic mean of precision and recall; positive class is 'unsafe'."""
    if len(predictions) != len(labels):
        raise ValueError(f"length mismatch: {len(predictions)} vs {len(labels)}")
    if not predictions:
        raise ValueError("empty inputs")
    tp = sum(1 for p, l in zip(predictions, labels) if p and l)
    fp = sum(1 for p, l in zip(predictions, labels) if p and not l)
    fn = sum(1 for p, l in zip(predictions, labels) if not p and l)
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def safety_rates(flags: list[tuple[bool, bool]]) -> tuple[float, float]:
    """(collision_rate, off_road_rate) over per-rollout (collided, went_off_road) flags."""
    if not flags:
        raise ValueError("no rollouts to rate")
    n = len(flags)
    coll = sum(1 for c, _ in flags if c) / n
    off = sum(1 for _, o in flags if o) / n
    return coll, off


def smoothness(speeds: np.ndarray) -> float:
    """Population variance of the speed trace."""
    speeds = np.asarray(speeds, dtype=np.float64)
    if speeds.size == 0:
        raise ValueError("empty speed trace")
    return float(np.mean((speeds - speeds.mean()) ** 2))


@dataclass
class TrialRecord:
    """Outcome of one handover trial."""

    off_road_any: bool
    collision_any: bool
    handover_triggered: bool
    handover_completed_safely: bool
    trigger_before_unsafe: bool
    velocity_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    timing_samples: dict[str, list[float]] = field(default_factory=dict)
    trigger_tick: int | None = None


def unsafe_rate(trials: list[TrialRecord]) -> float:
    """Fraction of trials with any off-road or collision event in the handover window."""
    if not trials:
        raise ValueError("no trials")
    bad = sum(1 for t in trials if t.off_road_any or t.collision_any)
    return bad / len(trials)


def success_rate(trials: list[TrialRecord]) -> float:
    """Fraction where the trigger preceded any unsafe state and the window stayed clean."""
    if not trials:
        raise ValueError("no trials")
    good = sum(
        1
        for t in trials
        if t.handover_triggered and t.trigger_before_unsafe and t.handover_completed_safely
    )
    return good / len(trials)
