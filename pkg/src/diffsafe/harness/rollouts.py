"""Turning sampled action sequences into pose rollouts and metric inputs."""

from __future__ import annotations

import time

import numpy as np

from ..diffusion.policy import PolicyHead, sample
from ..diffusion.training import WindowIndex
from ..drivers.dataset import DemoDataset
from ..nn import ConditioningVector, build_conditioning_batch
from ..sim.dynamics import step_dynamics
from ..sim.track import Track, collision, off_road
from ..sim.types import Action, CarState, SimConfig
from .metrics import RolloutSet


def integrate_actions(start: CarState, actions: np.ndarray, sim_cfg: SimConfig) -> np.ndarray:
    """Roll raw actions forward from a start state; returns (T, 3) poses (x, y, theta)."""
    poses = np.empty((len(actions), 3))
    state = start
    for i, row in enumerate(actions):
        state = step_dynamics(state, Action(steer=row[0], throttle=row[1], brake=row[2]), sim_cfg)
        poses[i] = (state.x, state.y, state.theta)
    return poses


def window_cond(policy: PolicyHead, index: WindowIndex, i: int) -> tuple[ConditioningVector, np.ndarray, CarState]:
    """Conditioning vector, ground-truth future actions, and start state for window i."""
    include_actions = policy.layout.include_actions
    states, latents, hist, future = index.gather(np.array([i]), include_actions)
    vals = build_conditioning_batch(states, latents, hist, policy.norm, policy.layout)[0]
    cond = ConditioningVector(values=vals, layout=policy.layout)
    s = states[0, -1]
    start = CarState(x=s[0], y=s[1], vx=s[2], vy=s[3], theta=s[4])
    return cond, future[0], start


def prediction_rollout_set(
    policy: PolicyHead,
    dataset: DemoDataset,
    index: WindowIndex,
    i: int,
    k_samples: int,
    sim_cfg: SimConfig,
    seed: int,
) -> RolloutSet:
    """Sample K action sequences for window i and integrate them against ground truth."""
    cond, future, start = window_cond(policy, index, i)
    gt = integrate_actions(start, future, sim_cfg)
    rollouts = []
    for j in range(k_samples):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i, j)))
        seq = sample(policy, cond, rng)
        rollouts.append(integrate_actions(start, seq.values, sim_cfg))
    ep_idx, t = index.items[i]
    ep = dataset.episodes[ep_idx]
    return RolloutSet(rollouts=tuple(rollouts), ground_truth=gt, track_seed=ep.track_seed, t_index=int(t))


def classify_rollout(track: Track, poses: np.ndarray, car_radius: float) -> tuple[bool, bool]:
    """(collided, went_off_road) for an integrated pose rollout."""
    collided = False
    off = False
    for x, y, theta in poses:
        s = CarState(x=x, y=y, vx=0.0, vy=0.0, theta=theta)
        collided = collided or collision(track, s, car_radius)
        off = off or off_road(track, s)
    return collided, off


def timed_samples(policy: PolicyHead, cond: ConditioningVector, n: int, seed: int) -> np.ndarray:
    """Wall-clock seconds for n sampling calls (sampling only, no raster work)."""
    out = np.empty(n)
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        t0 = time.perf_counter()
        sample(policy, cond, rng)
        out[i] = time.perf_counter() - t0
    return out
