"""Closed-loop handover benchmarks: lapse trials, head-on comparison, gamma sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..autonomy.handover import HandoverConfig, MODE_HUMAN
from ..autonomy.loop import EXECUTOR_BLEND, EXECUTOR_PARTIAL, ControlLoop, LoopConfig
from ..diffusion.policy import PolicyHead
from ..drivers.episodes import start_state
from ..drivers.policies import ExpertConfig, expert_policy
from ..nn import AutoencoderWeights
from ..seeding import rng_for
from ..sim.track import Obstacle, Track, TrackParams, generate_track
from ..sim.types import Action, CarState, SimConfig
from .metrics import TrialRecord, smoothness, success_rate, unsafe_rate


@dataclass
class StackArtifacts:
    """Everything a closed-loop benchmark needs."""

    evaluator: PolicyHead
    copilot: PolicyHead
    encoder: AutoencoderWeights | None
    sim_cfg: SimConfig
    track_params: TrackParams
    handover: HandoverConfig
    expert: ExpertConfig = ExpertConfig()


class ScriptedLapseDriver:
    """Expert driving until `lapse_tick`, then a frozen off-policy steer."""

    tag = "scripted-lapse"

    def __init__(self, sim_cfg: SimConfig, lapse_tick: int, lapse_steer: float, expert: ExpertConfig = ExpertConfig()):
        self.sim_cfg = sim_cfg
        self.lapse_tick = lapse_tick
        self.lapse_steer = lapse_steer
        self.expert = expert
        self.t = 0

    def act(self, track: Track, state: CarState) -> Action:
        base = expert_policy(track, state, self.sim_cfg, self.expert)
        self.t += 1
        if self.t - 1 >= self.lapse_tick:
            # distracted driver: wheel held off-line, foot resting lightly
            return Action(steer=self.lapse_steer, throttle=0.2, brake=0.0)
        return base


class ObliviousDriver:
    """Pure pursuit on the bare centerline: ignores obstacles entirely."""

    tag = "oblivious"

    def __init__(self, track: Track, sim_cfg: SimConfig, expert: ExpertConfig = ExpertConfig()):
        self.bare = Track(centerline=track.centerline, half_width=track.half_width, obstacles=(), seed=track.seed)
        self.sim_cfg = sim_cfg
        self.expert = expert

    def act(self, track: Track, state: CarState) -> Action:
        return expert_policy(self.bare, state, self.sim_cfg, self.expert)


def _analyze_trial(loop: ControlLoop, settle_window: int) -> TrialRecord:
    records = loop.records
    trigger = loop.trigger_tick
    first_unsafe = next((r.tick for r in records if r.off_road or r.collision), None)
    triggered = trigger is not None
    trigger_before_unsafe = triggered and (first_unsafe is None or trigger < first_unsafe)
    if triggered:
        window = [r for r in records if r.tick >= trigger]
        off_any = any(r.off_road for r in window)
        coll_any = any(r.collision for r in window)
        trace_end = trigger + loop.handover_cfg.ramp_steps + settle_window
        trace = np.array([math.hypot(r.state.vx, r.state.vy) for r in window if r.tick <= trace_end])
    else:
        off_any = any(r.off_road for r in records)
        coll_any = any(r.collision for r in records)
        trace = np.zeros(0)
    return TrialRecord(
        off_road_any=off_any,
        collision_any=coll_any,
        handover_triggered=triggered,
        handover_completed_safely=triggered and not (off_any or coll_any),
        trigger_before_unsafe=trigger_before_unsafe,
        velocity_trace=trace,
        timing_samples={
            "evaluator_sample": loop.timings.evaluator_sample,
            "score": loop.timings.score,
            "copilot_sample": loop.timings.copilot_sample,
        },
        trigger_tick=trigger,
    )


def run_lapse_trial(
    stack: StackArtifacts,
    track: Track,
    seed: int,
    loop_cfg: LoopConfig,
    warmup_margin: int = 12,
    post_window: int = 70,
    settle_window: int = 20,
) -> TrialRecord:
    """One seeded trial: scripted lapse toward the boundary, full closed loop."""
    rng = rng_for(seed, track.seed)
    start_s = float(rng.uniform(0, track.total_length))
    warmup = max(stack.evaluator.t_obs, stack.copilot.t_obs)
    lapse_tick = warmup + warmup_margin + int(rng.integers(0, 15))
    lapse_steer = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.3, 0.5))
    driver = ScriptedLapseDriver(stack.sim_cfg, lapse_tick, lapse_steer, stack.expert)
    loop = ControlLoop(
        track=track,
        car=start_state(track, start_s),
        evaluator=stack.evaluator,
        copilot=stack.copilot,
        handover_cfg=stack.handover,
        sim_cfg=stack.sim_cfg,
        loop_cfg=loop_cfg,
        encoder=stack.encoder,
        seed=seed,
    )
    for _ in range(lapse_tick + post_window):
        loop.step(driver.act(track, loop.car))
    return _analyze_trial(loop, settle_window)


def handover_benchmark(
    stack: StackArtifacts,
    track_seeds: list[int],
    n_trials: int,
    seed: int,
    loop_cfg: LoopConfig = LoopConfig(),
) -> tuple[list[TrialRecord], dict]:
    """`n_trials` seeded lapse trials spread across the track suite."""
    tracks = [generate_track(s, stack.track_params) for s in track_seeds]
    trials = []
    for i in range(n_trials):
        track = tracks[i % len(tracks)]
        trials.append(run_lapse_trial(stack, track, seed=seed * 10_000 + i, loop_cfg=loop_cfg))
    traces = [t.velocity_trace for t in trials if t.velocity_trace.size > 0]
    summary = {
        "trials": n_trials,
        "handover_success_rate": success_rate(trials),
        "unsafe_rate": unsafe_rate(trials),
        "trigger_rate": sum(1 for t in trials if t.handover_triggered) / n_trials,
        "mean_smoothness": float(np.mean([smoothness(tr) for tr in traces])) if traces else float("nan"),
    }
    return trials, summary


def make_head_on_track(seed: int, params: TrackParams, obstacle_radius: float = 0.7, obstacle_arclength: float = 30.0, lateral: float = 0.0) -> Track:
    """A gentle track with one obstacle dead ahead on the centerline."""
    base = generate_track(seed, replace(params, n_obstacles=0, radial_noise=0.08))
    arclen = base.arclength
    i = min(int(np.searchsorted(arclen, obstacle_arclength)), len(base.centerline) - 2)
    seg = base.centerline[i + 1] - base.centerline[i]
    norm = seg / math.hypot(seg[0], seg[1])
    normal = np.array([-norm[1], norm[0]])
    center = base.centerline[i] + lateral * normal
    return Track(
        centerline=base.centerline,
        half_width=base.half_width,
        obstacles=(Obstacle(float(center[0]), float(center[1]), obstacle_radius),),
        seed=seed,
    )


def run_head_on_trial(
    stack: StackArtifacts,
    executor: str,
    seed: int,
    trigger_distance: float = 7.0,
    trial_len: int = 110,
    obstacle_arclength: float = 30.0,
) -> TrialRecord:
    """Oblivious driver charging an obstacle; authority transfers at a fixed distance."""
    rng = rng_for("head-on", seed)
    lateral = float(rng.uniform(-0.15, 0.15))
    track = make_head_on_track(7000 + seed % 7, stack.track_params, lateral=lateral, obstacle_arclength=obstacle_arclength)
    driver = ObliviousDriver(track, stack.sim_cfg, stack.expert)
    loop_cfg = LoopConfig(executor=executor)
    loop = ControlLoop(
        track=track,
        car=start_state(track, 0.0),
        evaluator=stack.evaluator,
        copilot=stack.copilot,
        handover_cfg=stack.handover,
        sim_cfg=stack.sim_cfg,
        loop_cfg=loop_cfg,
        encoder=stack.encoder,
        seed=seed,
    )
    ob = track.obstacles[0]
    for _ in range(trial_len):
        d = math.hypot(loop.car.x - ob.x, loop.car.y - ob.y)
        if loop.hs.mode == MODE_HUMAN and d <= trigger_distance:
            loop.request_trigger()
        loop.step(driver.act(track, loop.car))
    return _analyze_trial(loop, settle_window=20)


def blending_comparison(stack: StackArtifacts, n_trials: int, seed: int) -> dict:
    """Paired head-on trials: partial diffusion vs naive blending, same seeds."""
    partial = [run_head_on_trial(stack, EXECUTOR_PARTIAL, seed * 1000 + i) for i in range(n_trials)]
    blend = [run_head_on_trial(stack, EXECUTOR_BLEND, seed * 1000 + i) for i in range(n_trials)]
    return {
        "trials": n_trials,
        "partial_unsafe_rate": unsafe_rate(partial),
        "blend_unsafe_rate": unsafe_rate(blend),
        "partial": partial,
        "blend": blend,
    }


def gamma0_sweep(
    stack: StackArtifacts,
    grid: list[float],
    track_seeds: list[int],
    trials_per_point: int,
    seed: int,
) -> list[dict]:
    """Re-run the lapse benchmark at each gamma0 with common trial seeds."""
    rows = []
    for g in grid:
        if not 0.0 < g < 1.0:
            raise ValueError(f"gamma0 grid values must lie in (0, 1), got {g}")
        stack_g = replace(stack, handover=replace(stack.handover, gamma0=g))
        _, summary = handover_benchmark(stack_g, track_seeds, trials_per_point, seed)
        rows.append(
            {
                "gamma0": g,
                "mean_smoothness": summary["mean_smoothness"],
                "unsafe_rate": summary["unsafe_rate"],
                "handover_success_rate": summary["handover_success_rate"],
            }
        )
    return rows
