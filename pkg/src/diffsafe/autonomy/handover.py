"""The one-way handover state machine and the simple blending baseline."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..sim.types import Action
from .scoring import SimilarityScore

MODE_HUMAN = "human"
MODE_TRANSITIONING = "transitioning"
MODE_COPILOT = "copilot"


@dataclass(frozen=True)
class HandoverConfig:
    tau_nll: float
    gamma0: float = 0.4
    ramp_steps: int = 4
    score_window: int = 3

    def __post_init__(self) -> None:
        if not self.tau_nll > 0:
            raise ValueError("tau_nll must be > 0")
        if not 0.0 < self.gamma0 < 1.0:
            raise ValueError("gamma0 must be in (0, 1)")
        if self.ramp_steps < 1:
            raise ValueError("ramp_steps must be >= 1")
        if self.score_window < 1:
            raise ValueError("score_window must be >= 1")


@dataclass(frozen=True)
class HandoverState:
    """Mode plus the ramp position and recent smoothed-score history."""

    mode: str = MODE_HUMAN
    gamma: float | None = None
    ramp_index: int = 0
    last_score: float | None = None
    history: tuple[float, ...] = ()

    def smoothed(self, window: int) -> float | None:
        """Mean of the last `window` scores; None until the window is full."""
        if len(self.history) < window:
            return None
        return float(np.mean(self.history[-window:]))


def initial_handover_state() -> HandoverState:
    return HandoverState()


def handover_update(hs: HandoverState, score: SimilarityScore | None, cfg: HandoverConfig) -> HandoverState:
    """Advance the state machine one control tick.

    Human: trigger once the smoothed score crosses tau. Transitioning: walk the
    ratio linearly from gamma0 to 1 over ramp_steps ticks, then hand off.
    Copilot is absorbing.
    """
    history = hs.history
    last = hs.last_score
    if score is not None:
        history = (history + (score.value,))[-max(cfg.score_window, 8) :]
        last = score.value

    if hs.mode == MODE_COPILOT:
        return replace(hs, last_score=last, history=history)

    if hs.mode == MODE_TRANSITIONING:
        if hs.ramp_index >= cfg.ramp_steps:
            return HandoverState(
                mode=MODE_COPILOT, gamma=None, ramp_index=hs.ramp_index, last_score=last, history=history
            )
        idx = hs.ramp_index + 1
        gamma = cfg.gamma0 + (1.0 - cfg.gamma0) * idx / cfg.ramp_steps
        return HandoverState(
            mode=MODE_TRANSITIONING, gamma=min(gamma, 1.0), ramp_index=idx, last_score=last, history=history
        )

    # human mode: check the smoothed score against the threshold
    candidate = HandoverState(mode=MODE_HUMAN, gamma=None, ramp_index=0, last_score=last, history=history)
    smoothed = candidate.smoothed(cfg.score_window)
    if smoothed is not None and smoothed > cfg.tau_nll:
        return HandoverState(
            mode=MODE_TRANSITIONING, gamma=cfg.gamma0, ramp_index=0, last_score=last, history=history
        )
    return candidate


def blend_actions(a_h: Action, a_c: Action, k_b: float) -> Action:
    """Per-channel convex combination k_b * human + (1 - k_b) * copilot."""
    if not 0.0 <= k_b <= 1.0:
        raise ValueError(f"blend coefficient must be in [0, 1], got {k_b}")
    return Action(
        steer=k_b * a_h.steer + (1 - k_b) * a_c.steer,
        throttle=k_b * a_h.throttle + (1 - k_b) * a_c.throttle,
        brake=k_b * a_h.brake + (1 - k_b) * a_c.brake,
    )
