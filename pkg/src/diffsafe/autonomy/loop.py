"""Tick-driven closed loop: score the human, run the handover, execute control.

One `ControlLoop` owns the car, the observation/action histories, the handover
state machine, and the copilot plan. Scoring runs inline each tick (the
evaluator sample plus the copilot residual); everything is deterministic given
the seed because each consumer draws from its own substream.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..diffusion.policy import ActionSequence, PolicyHead, partial_diffuse, sample, sample_batch
from ..nn import AutoencoderWeights, ConditioningVector, build_conditioning, encode_batch
from ..sim.dynamics import step_dynamics
from ..sim.raster import local_raster
from ..sim.track import Track, collision, off_road
from ..sim.types import Action, CarState, SimConfig
from .handover import (
    MODE_COPILOT,
    MODE_HUMAN,
    MODE_TRANSITIONING,
    HandoverConfig,
    HandoverState,
    handover_update,
    initial_handover_state,
)
from .scoring import SimilarityScore, nll_score, nll_score_multi

EXECUTOR_PARTIAL = "partial"
EXECUTOR_BLEND = "blend"


@dataclass(frozen=True)
class LoopConfig:
    replan_interval: int = 8
    raster_size: int = 32
    raster_resolution: float = 0.5
    car_radius: float = 0.4
    executor: str = EXECUTOR_PARTIAL
    prediction_draws: int = 3  # evaluator futures pooled into each score
    forced_trigger_tick: int | None = None  # scenario hook: bypass the score trigger
    capture_timings: bool = False


@dataclass
class StepRecord:
    tick: int
    mode: str
    gamma: float | None
    score: float | None
    action: Action
    human_action: Action
    state: CarState
    off_road: bool
    collision: bool
    predicted_score: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "v": 1,
            "tick": self.tick,
            "mode": self.mode,
            "gamma": self.gamma,
            "score": self.score,
            "predicted_score": self.predicted_score,
            "action": list(self.action.as_tuple()),
            "human_action": list(self.human_action.as_tuple()),
            "state": [self.state.x, self.state.y, self.state.vx, self.state.vy, self.state.theta],
            "off_road": self.off_road,
            "collision": self.collision,
        }


@dataclass
class LoopTimings:
    evaluator_sample: list[float] = field(default_factory=list)
    score: list[float] = field(default_factory=list)
    copilot_sample: list[float] = field(default_factory=list)


class ControlLoop:
    def __init__(
        self,
        track: Track,
        car: CarState,
        evaluator: PolicyHead,
        copilot: PolicyHead,
        handover_cfg: HandoverConfig,
        sim_cfg: SimConfig,
        loop_cfg: LoopConfig = LoopConfig(),
        encoder: AutoencoderWeights | None = None,
        seed: int = 0,
    ):
        if loop_cfg.executor not in (EXECUTOR_PARTIAL, EXECUTOR_BLEND):
            raise ValueError(f"unknown executor: {loop_cfg.executor}")
        self.track = track
        self.car = car
        self.evaluator = evaluator
        self.copilot = copilot
        self.handover_cfg = handover_cfg
        self.sim_cfg = sim_cfg
        self.cfg = loop_cfg
        self.encoder = encoder
        ss = np.random.SeedSequence(seed)
        child = ss.spawn(3)
        self.rng_eval = np.random.default_rng(child[0])
        self.rng_score = np.random.default_rng(child[1])
        self.rng_copilot = np.random.default_rng(child[2])

        self.warmup = max(evaluator.t_obs, copilot.t_obs)
        self.obs_states: deque[np.ndarray] = deque(maxlen=self.warmup)
        self.obs_latents: deque[np.ndarray] = deque(maxlen=self.warmup)
        self.human_actions: deque[np.ndarray] = deque(maxlen=max(self.warmup, copilot.t_pred))
        # conditioning snapshots so recent behavior is scored from where it began
        self.past_copilot_conds: deque[ConditioningVector] = deque(maxlen=copilot.t_pred + 1)
        self.hs: HandoverState = initial_handover_state()
        self.tick = 0
        self.plan: ActionSequence | None = None
        self.plan_cursor = 0
        self.transition_inputs: list[np.ndarray] = []
        self.records: list[StepRecord] = []
        self.timings = LoopTimings()
        self.trigger_tick: int | None = None
        self._trigger_requested = False

    def request_trigger(self) -> None:
        """Force the handover trigger on the next tick (scenario harness hook)."""
        self._trigger_requested = True

    # -- helpers ---------------------------------------------------------------

    def _latent(self, state: CarState) -> np.ndarray:
        patch = local_raster(self.track, state, self.cfg.raster_size, self.cfg.raster_resolution)
        if self.encoder is None:
            return np.zeros(self.copilot.layout.latent_dim)
        return encode_batch(self.encoder, patch.grid[None].astype(np.float64))[0]

    def _cond(self, policy: PolicyHead, with_actions: bool) -> ConditioningVector:
        t_obs = policy.t_obs
        states = np.stack(list(self.obs_states)[-t_obs:])
        latents = np.stack(list(self.obs_latents)[-t_obs:])[:, : policy.layout.latent_dim]
        actions = None
        if with_actions:
            actions = np.stack(list(self.human_actions)[-t_obs:])
        return build_conditioning(states, latents, actions, policy.norm, policy.layout)

    def _score_human(self) -> tuple[SimilarityScore, SimilarityScore]:
        """(trigger score, predicted-behavior score).

        The trigger scores the last t_pred actual human actions under the
        conditioning captured when that window began, which is exactly the
        quantity the threshold was calibrated on. The evaluator's sampled
        prediction is scored as well (best draw over `prediction_draws`) for
        the run log, the F1 protocol, and the cockpit preview.
        """
        cond_eval = self._cond(self.evaluator, with_actions=self.evaluator.layout.include_actions)
        t0 = time.perf_counter()
        predicted = sample_batch(self.evaluator, cond_eval, self.rng_eval, self.cfg.prediction_draws)
        t1 = time.perf_counter()
        cond_cop = self._cond(self.copilot, with_actions=False)
        prefixes = [
            ActionSequence(values=p.values[: self.copilot.t_pred], space="raw") for p in predicted
        ]
        predicted_score = nll_score_multi(prefixes, self.copilot, cond_cop, self.rng_score)

        t_pred = self.copilot.t_pred
        recent = np.stack(list(self.human_actions)[-t_pred:])
        lagged_cond = self.past_copilot_conds[0]
        trigger_score = nll_score(
            ActionSequence(values=recent, space="raw"), self.copilot, lagged_cond, self.rng_score
        )
        if self.cfg.capture_timings:
            self.timings.evaluator_sample.append(t1 - t0)
            self.timings.score.append(time.perf_counter() - t1)
        return trigger_score, predicted_score

    def _copilot_plan_action(self) -> Action:
        if self.plan is None or self.plan_cursor >= min(self.cfg.replan_interval, len(self.plan)):
            cond = self._cond(self.copilot, with_actions=False)
            t0 = time.perf_counter()
            self.plan = sample(self.copilot, cond, self.rng_copilot)
            if self.cfg.capture_timings:
                self.timings.copilot_sample.append(time.perf_counter() - t0)
            self.plan_cursor = 0
        row = self.plan.values[self.plan_cursor]
        self.plan_cursor += 1
        return Action(steer=row[0], throttle=row[1], brake=row[2])

    def _transition_action(self, human_action: Action) -> Action:
        self.transition_inputs.append(np.array(human_action.as_tuple()))
        recent = np.stack(self.transition_inputs[-self.copilot.t_pred :])
        seq = ActionSequence(values=recent, space="raw")
        cond = self._cond(self.copilot, with_actions=False)
        if self.cfg.executor == EXECUTOR_BLEND:
            a_c = self._copilot_plan_action()
            from .handover import blend_actions

            return blend_actions(human_action, a_c, k_b=1.0 - float(self.hs.gamma))
        out = partial_diffuse(self.copilot, seq, cond, float(self.hs.gamma), self.rng_copilot)
        row = out.values[0]
        return Action(steer=row[0], throttle=row[1], brake=row[2])

    # -- main tick ----------------------------------------------------------------

    def step(self, human_action: Action) -> StepRecord:
        """One control tick: observe, score, update authority, execute, advance."""
        state = self.car
        self.obs_states.append(np.array(state.as_array()))
        self.obs_latents.append(self._latent(state))
        if len(self.obs_states) >= self.copilot.t_obs:
            self.past_copilot_conds.append(self._cond(self.copilot, with_actions=False))

        warm = len(self.obs_states) >= self.warmup and len(self.human_actions) >= self.warmup
        # the behavior score needs a full lag buffer so the scored action window
        # aligns exactly with the conditioning it started from
        scoring_ready = warm and len(self.past_copilot_conds) == self.past_copilot_conds.maxlen
        score: SimilarityScore | None = None
        predicted_score: SimilarityScore | None = None
        if warm:
            if self.hs.mode == MODE_HUMAN:
                forced_now = self._trigger_requested or (
                    self.cfg.forced_trigger_tick is not None and self.tick >= self.cfg.forced_trigger_tick
                )
                if forced_now:
                    forced = SimilarityScore(value=self.handover_cfg.tau_nll * 2.0, components=np.zeros(1))
                    for _ in range(self.handover_cfg.score_window):
                        self.hs = handover_update(self.hs, forced, self.handover_cfg)
                        if self.hs.mode != MODE_HUMAN:
                            break
                elif scoring_ready:
                    score, predicted_score = self._score_human()
                    self.hs = handover_update(self.hs, score, self.handover_cfg)
            else:
                self.hs = handover_update(self.hs, None, self.handover_cfg)

        if self.hs.mode != MODE_HUMAN and self.trigger_tick is None:
            self.trigger_tick = self.tick

        if not warm or self.hs.mode == MODE_HUMAN:
            executed = human_action
        elif self.hs.mode == MODE_TRANSITIONING:
            executed = self._transition_action(human_action)
        else:
            executed = self._copilot_plan_action()

        self.human_actions.append(np.array(human_action.as_tuple()))
        new_state = step_dynamics(state, executed, self.sim_cfg)
        record = StepRecord(
            tick=self.tick,
            mode=self.hs.mode if warm else MODE_HUMAN,
            gamma=self.hs.gamma,
            score=None if score is None else score.value,
            predicted_score=None if predicted_score is None else predicted_score.value,
            action=executed,
            human_action=human_action,
            state=new_state,
            off_road=off_road(self.track, new_state),
            collision=collision(self.track, new_state, self.cfg.car_radius),
        )
        self.records.append(record)
        self.car = new_state
        self.tick += 1
        return record
