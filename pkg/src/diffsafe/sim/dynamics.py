"""Kinematic bicycle model with simple longitudinal dynamics.

World frame is the usual math convention (x right, y up, heading CCW-positive).
Positive steer commands a right turn, so the front wheel angle carries the
opposite sign of the steer channel.
"""

from __future__ import annotations

import math

from .geometry import wrap_angle
from .types import Action, CarState, SimConfig


def step_dynamics(state: CarState, action: Action, cfg: SimConfig) -> CarState:
    """Advance the car by one time step.

    Forward speed is integrated from throttle/brake/drag and clamped at zero
    (no reverse). Heading follows the bicycle relation with the updated speed;
    residual lateral velocity decays exponentially. A hard brake (brake > 0.9)
    stops the car dead once its per-step travel falls under
    `cfg.hard_brake_stop_dist`.
    """
    dt = cfg.dt
    cos_t = math.cos(state.theta)
    sin_t = math.sin(state.theta)
    v_long = state.vx * cos_t + state.vy * sin_t
    v_lat = -state.vx * sin_t + state.vy * cos_t  # along the left normal

    accel = action.throttle * cfg.max_accel - action.brake * cfg.max_brake_decel - cfg.drag_coeff * v_long
    v_new = max(0.0, v_long + dt * accel)
    if action.brake > 0.9 and v_new * dt < cfg.hard_brake_stop_dist:
        v_new = 0.0
    v_lat_new = v_lat * math.exp(-cfg.lateral_grip * dt)

    wheel_angle = -action.steer * cfg.max_steer_angle
    theta_new = wrap_angle(state.theta + dt * (v_new / cfg.wheelbase) * math.tan(wheel_angle))

    cos_n = math.cos(theta_new)
    sin_n = math.sin(theta_new)
    vx_new = v_new * cos_n - v_lat_new * sin_n
    vy_new = v_new * sin_n + v_lat_new * cos_n
    return CarState(
        x=state.x + dt * vx_new,
        y=state.y + dt * vy_new,
        vx=vx_new,
        vy=vy_new,
        theta=theta_new,
    )
