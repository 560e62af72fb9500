"""Core value types for the driving simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import wrap_angle


@dataclass(frozen=True)
class Action:
    """Single control command: steering in [-1, 1], throttle and brake in [0, 1].

    Negative steer turns left, positive steer turns right. Values are clamped
    to their intervals on construction; NaN is rejected.
    """

    steer: float
    throttle: float
    brake: float

    def __post_init__(self) -> None:
        for name in ("steer", "throttle", "brake"):
            v = getattr(self, name)
            if math.isnan(v):
                raise ValueError(f"Action.{name} is NaN")
        object.__setattr__(self, "steer", min(1.0, max(-1.0, float(self.steer))))
        object.__setattr__(self, "throttle", min(1.0, max(0.0, float(self.throttle))))
        object.__setattr__(self, "brake", min(1.0, max(0.0, float(self.brake))))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.steer, self.throttle, self.brake)


@dataclass(frozen=True)
class CarState:
    """Planar pose and velocity: position (m), world-frame velocity (m/s), heading (rad).

    Heading is wrapped to (-pi, pi] on construction; all fields must be finite.
    """

    x: float
    y: float
    vx: float
    vy: float
    theta: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "vx", "vy", "theta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"CarState.{name} is not finite")
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    def as_array(self) -> tuple[float, float, float, float, float]:
        return (self.x, self.y, self.vx, self.vy, self.theta)


@dataclass(frozen=True)
class SimConfig:
    """Physical parameters of the car model.

    All parameters must be positive. `hard_brake_stop_dist` is the per-step
    travel below which a hard brake (brake > 0.9) locks the car to a dead stop.
    """

    dt: float = 0.1
    wheelbase: float = 1.0
    max_steer_angle: float = 0.35
    max_accel: float = 4.0
    max_brake_decel: float = 8.0
    drag_coeff: float = 0.35
    lateral_grip: float = 6.0
    hard_brake_stop_dist: float = 0.1

    def __post_init__(self) -> None:
        for name in (
            "dt",
            "wheelbase",
            "max_steer_angle",
            "max_accel",
            "max_brake_decel",
            "drag_coeff",
            "lateral_grip",
            "hard_brake_stop_dist",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"SimConfig.{name} must be > 0")
