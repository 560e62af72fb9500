import math

import numpy as np
import pytest

from diffsafe.sim import Action, CarState, SimConfig, step_dynamics


CFG = SimConfig()


def test_action_clamping_and_nan_rejection():
    a = Action(steer=2.0, throttle=-0.5, brake=1.5)
    assert a.as_tuple() == (1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Action(steer=float("nan"), throttle=0, brake=0)


def test_carstate_wraps_heading_and_rejects_nonfinite():
    s = CarState(x=0, y=0, vx=0, vy=0, theta=3 * math.pi)
    assert -math.pi < s.theta <= math.pi
    assert s.theta == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        CarState(x=float("inf"), y=0, vx=0, vy=0, theta=0)


def test_rest_is_equilibrium():
    s = CarState(x=1.0, y=2.0, vx=0.0, vy=0.0, theta=0.3)
    s2 = step_dynamics(s, Action(0, 0, 0), CFG)
    assert s2 == s


def test_full_throttle_from_rest():
    # v' = max(0, 0 + dt*(1*max_accel - 0 - drag*0)) = 0.4 with dt=0.1, max_accel=4
    cfg = SimConfig(dt=0.1, max_accel=4.0)
    s = CarState(x=0, y=0, vx=0, vy=0, theta=0.7)
    s2 = step_dynamics(s, Action(0, 1, 0), cfg)
    v = math.hypot(s2.vx, s2.vy)
    assert v == pytest.approx(0.4, abs=1e-12)
    # displacement of dt*v along the heading
    assert s2.x == pytest.approx(0.04 * math.cos(0.7), abs=1e-12)
    assert s2.y == pytest.approx(0.04 * math.sin(0.7), abs=1e-12)
    assert s2.theta == pytest.approx(0.7)


def test_steer_sign_consistent_over_ten_steps():
    s = CarState(x=0, y=0, vx=3.0, vy=0, theta=0.0)
    deltas = []
    for _ in range(10):
        s2 = step_dynamics(s, Action(steer=1.0, throttle=0.5, brake=0.0), CFG)
        deltas.append(s2.theta - s.theta)
        s = s2
    signs = {math.copysign(1, d) for d in deltas}
    assert signs == {-1.0}  # positive steer turns right (heading decreases)


def test_steer_left_increases_heading():
    s = CarState(x=0, y=0, vx=3.0, vy=0, theta=0.0)
    s2 = step_dynamics(s, Action(steer=-1.0, throttle=0.5, brake=0.0), CFG)
    assert s2.theta > 0


def test_forward_speed_never_negative():
    s = CarState(x=0, y=0, vx=0.5, vy=0, theta=0.0)
    for _ in range(50):
        s = step_dynamics(s, Action(0, 0, 1.0), CFG)
    v_long = s.vx * math.cos(s.theta) + s.vy * math.sin(s.theta)
    assert v_long >= 0.0
    assert s.speed == pytest.approx(0.0, abs=1e-9)


def test_hard_brake_stops_dead_at_low_speed():
    cfg = SimConfig()
    s = CarState(x=0, y=0, vx=0.5, vy=0, theta=0.0)
    s2 = step_dynamics(s, Action(0, 0, 1.0), cfg)
    assert s2.speed == 0.0
    # gentle brake from the same state leaves some speed
    s3 = step_dynamics(s, Action(0, 0, 0.02), cfg)
    assert s3.speed > 0.0


def test_determinism_and_finiteness_fuzz():
    rng = np.random.default_rng(42)
    s = CarState(x=0, y=0, vx=0, vy=0, theta=0)
    for i in range(100_000):
        a = Action(
            steer=float(rng.uniform(-1.5, 1.5)),
            throttle=float(rng.uniform(-0.2, 1.2)),
            brake=float(rng.uniform(-0.2, 1.2)),
        )
        s = step_dynamics(s, a, CFG)
        if i % 20000 == 0:
            assert all(math.isfinite(v) for v in s.as_array())
    assert all(math.isfinite(v) for v in s.as_array())

    # bit-identical replay
    rng = np.random.default_rng(7)
    actions = [
        Action(float(rng.uniform(-1, 1)), float(rng.uniform(0, 1)), float(rng.uniform(0, 1)))
        for _ in range(200)
    ]
    s1 = CarState(x=0, y=0, vx=0, vy=0, theta=0.2)
    s2 = CarState(x=0, y=0, vx=0, vy=0, theta=0.2)
    for a in actions:
        s1 = step_dynamics(s1, a, CFG)
        s2 = step_dynamics(s2, a, CFG)
    assert s1 == s2
