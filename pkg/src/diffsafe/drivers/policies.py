"""Scripted demonstrators: pure-pursuit expert and a noisy human-like variant."""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, replace

import numpy as np

from ..sim.geometry import wrap_angle
from ..sim.track import Track
from ..sim.types import Action, CarState, SimConfig
from .racing_line import RacingLine, RacingLineConfig, build_racing_line


@dataclass(frozen=True)
class ExpertConfig:
    v_max: float = 4.0
    a_lat_max: float = 1.2
    lookahead_base: float = 3.0
    lookahead_gain: float = 0.8
    speed_window_time: float = 1.5
    speed_kp: float = 0.8
    brake_kp: float = 0.5
    speed_deadband: float = 0.15
    line: RacingLineConfig = RacingLineConfig()


_LINE_CACHE: dict[int, tuple] = {}  # id(track) -> (weakref to track, line cfg, line)


def _racing_line(track: Track, cfg: ExpertConfig) -> RacingLine:
    entry = _LINE_CACHE.get(id(track))
    if entry is not None:
        ref, line_cfg, line = entry
        if ref() is track and line_cfg == cfg.line:  # id alone can be a recycled address
            return line
    line = build_racing_line(track, cfg.line)
    if len(_LINE_CACHE) > 64:
        _LINE_CACHE.clear()
    _LINE_CACHE[id(track)] = (weakref.ref(track), cfg.line, line)
    return line


def expert_policy(track: Track, state: CarState, cfg: SimConfig, expert: ExpertConfig = ExpertConfig()) -> Action:
    """Pure pursuit on the obstacle-aware racing line with curvature-limited speed."""
    line = _racing_line(track, expert)
    v = state.vx * math.cos(state.theta) + state.vy * math.sin(state.theta)
    v = max(0.0, v)

    _, s_near = line.nearest(np.array([state.x, state.y]))
    lookahead = max(expert.lookahead_base, expert.lookahead_gain * v)
    target = line.point_at(s_near + lookahead)
    alpha = wrap_angle(math.atan2(target[1] - state.y, target[0] - state.x) - state.theta)
    wheel = math.atan2(2.0 * cfg.wheelbase * math.sin(alpha), lookahead)
    steer = -wheel / cfg.max_steer_angle  # positive steer = right turn

    window = max(lookahead, v * expert.speed_window_time)
    kappa = line.max_abs_curvature(s_near, window)
    v_star = expert.v_max if kappa < 1e-9 else min(expert.v_max, math.sqrt(expert.a_lat_max / kappa))
    err = v_star - v
    feedforward = cfg.drag_coeff * v_star / cfg.max_accel
    if err >= -expert.speed_deadband:
        throttle = feedforward + expert.speed_kp * err
        brake = 0.0
    else:
        throttle = 0.0
        brake = expert.brake_kp * (-err - expert.speed_deadband)
    return Action(steer=steer, throttle=throttle, brake=brake)


@dataclass(frozen=True)
class HumanConfig:
    """Stochastic perturbations layered on the expert."""

    ou_sigma: float = 0.15  # stationary std of the steering noise
    ou_theta: float = 2.0
    p_lapse: float = 0.01
    lapse_min_steps: int = 10
    lapse_max_steps: int = 25
    expert: ExpertConfig = ExpertConfig()


@dataclass(frozen=True)
class LapseState:
    """Attention-lapse bookkeeping carried across steps."""

    active: bool = False
    remaining: int = 0
    frozen_action: Action | None = None
    ou_noise: float = 0.0

    def __post_init__(self) -> None:
        if self.remaining < 0:
            raise ValueError("remaining must be >= 0")
        if not math.isfinite(self.ou_noise):
            raise ValueError("ou_noise must be finite")


def human_policy(
    track: Track,
    state: CarState,
    cfg: SimConfig,
    rng: np.random.Generator,
    lapse: LapseState,
    human: HumanConfig = HumanConfig(),
) -> tuple[Action, LapseState]:
    """Expert output with OU steering noise and occasional frozen-action lapses.

    Deterministic given the rng stream. With zero noise and zero lapse
    probability this reduces exactly to the expert.
    """
    if lapse.active:
        remaining = lapse.remaining - 1
        action = lapse.frozen_action
        if remaining <= 0:
            return action, replace(lapse, active=False, remaining=0)
        return action, replace(lapse, remaining=remaining)

    base = expert_policy(track, state, cfg, human.expert)
    noise = lapse.ou_noise
    if human.ou_sigma > 0.0:
        decay = 1.0 - human.ou_theta * cfg.dt
        noise = noise * decay + human.ou_sigma * math.sqrt(2.0 * human.ou_theta * cfg.dt) * rng.standard_normal()
    action = Action(steer=base.steer + noise, throttle=base.throttle, brake=base.brake)

    if human.p_lapse > 0.0 and rng.uniform() < human.p_lapse:
        duration = int(rng.integers(human.lapse_min_steps, human.lapse_max_steps + 1))
        return action, LapseState(active=True, remaining=duration, frozen_action=action, ou_noise=noise)
    return action, replace(lapse, ou_noise=noise)


class ExpertDriver:
    """Callable wrapper used by the episode recorder."""

    tag = "expert"

    def __init__(self, sim_cfg: SimConfig, expert: ExpertConfig = ExpertConfig()):
        self.sim_cfg = sim_cfg
        self.expert = expert

    def act(self, track: Track, state: CarState) -> Action:
        return expert_policy(track, state, self.sim_cfg, self.expert)


class HumanDriver:
    """Expert plus OU noise and lapses; owns its rng stream and lapse state."""

    tag = "human-like"

    def __init__(self, sim_cfg: SimConfig, rng: np.random.Generator, human: HumanConfig = HumanConfig()):
        self.sim_cfg = sim_cfg
        self.rng = rng
        self.human = human
        self.lapse = LapseState()

    def act(self, track: Track, state: CarState) -> Action:
        action, self.lapse = human_policy(track, state, self.sim_cfg, self.rng, self.lapse, self.human)
        return action
