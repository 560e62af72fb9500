import json
import socket
import threading
import time

import numpy as np
import pytest

from diffsafe import wire
from diffsafe.autonomy import ControlLoop, HandoverConfig, LoopConfig
from diffsafe.drivers import ExpertDriver, start_state
from diffsafe.service import FREEZE_ACTION, LiveServer
from diffsafe.sim import Action, SimConfig, TrackParams, generate_track

CFG = SimConfig()


def _server(tiny_policies, **kw):
    evaluator, copilot = tiny_policies
    track = generate_track(3, TrackParams())
    return LiveServer(
        track=track,
        car=start_state(track, 0.0),
        evaluator=evaluator,
        copilot=copilot,
        handover_cfg=HandoverConfig(tau_nll=1e9),
        sim_cfg=CFG,
        loop_cfg=LoopConfig(),
        encoder=None,
        seed=7,
        port=0,
        **kw,
    )


class Client:
    def __init__(self, port, role="driver"):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=5)
        self.reader = self.sock.makefile("rb")
        self.send(
            {"v": wire.WIRE_VERSION, "type": "hello", "tick": 0, "role": role}
        )

    def send(self, msg):
        self.sock.sendall(wire.encode(msg))

    def recv(self, timeout=5.0):
        self.sock.settimeout(timeout)
        line = self.reader.readline()
        if not line:
            return None
        return json.loads(line)

    def recv_type(self, mtype, timeout=5.0, max_msgs=500):
        for _ in range(max_msgs):
            msg = self.recv(timeout)
            if msg is None:
                return None
            if msg["type"] == mtype:
                return msg
        return None

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


def test_idle_server_keeps_car_stopped(tiny_policies):
    server = _server(tiny_policies, tick_hz=100.0, max_ticks=30)
    thread = server.start()
    spect = Client(server.port, role="spectator")
    hello = spect.recv_type("hello")
    assert hello["role"] == "spectator"
    track_msg = spect.recv_type("track")
    assert track_msg["track"]["version"] == 1
    state = spect.recv_type("state")
    assert state is not None
    thread.join(timeout=10)
    # with no driver the car never moves
    assert server.loop.car.speed == 0.0
    assert server.loop.records[-1].state.x == server.loop.records[0].state.x
    spect.close()


def test_driver_input_moves_car_and_roles(tiny_policies):
    server = _server(tiny_policies, tick_hz=100.0, max_ticks=60)
    thread = server.start()
    driver = Client(server.port, role="driver")
    assert driver.recv_type("hello")["role"] == "driver"
    second = Client(server.port, role="driver")
    assert second.recv_type("hello")["role"] == "spectator"  # one driver max
    state = driver.recv_type("state")
    for _ in range(50):
        tick = state["tick"]
        driver.send(wire.input_msg(tick, 0.0, 1.0, 0.0))
        state = driver.recv_type("state")
        if state is None:
            break
    thread.join(timeout=10)
    assert server.loop.car.speed > 0.1
    driver.close()
    second.close()


def test_latest_input_wins_within_tick(tiny_policies):
    server = _server(tiny_policies, lockstep=True, max_ticks=2)
    thread = server.start()
    driver = Client(server.port, role="driver")
    driver.recv_type("hello")
    # the higher-stamped input wins the tick no matter the arrival interleaving
    driver.send(wire.input_msg(1, -0.5, 1.0, 0.0))
    driver.send(wire.input_msg(0, 0.5, 0.0, 0.0))
    state = driver.recv_type("state")
    assert state["action"] == [-0.5, 1.0, 0.0]
    driver.send(wire.input_msg(1, 0.0, 0.0, 0.0))
    thread.join(timeout=10)
    driver.close()


def test_stale_input_holds_then_freezes(tiny_policies):
    server = _server(tiny_policies, tick_hz=200.0, max_ticks=40)
    thread = server.start()
    driver = Client(server.port, role="driver")
    driver.recv_type("hello")
    state = driver.recv_type("state")
    driver.send(wire.input_msg(state["tick"], 0.0, 0.8, 0.0))
    # then go silent: hold-last for up to 5 ticks, frozen afterwards
    thread.join(timeout=10)
    held = [r for r in server.loop.records if r.action.throttle == 0.8]
    assert 1 <= len(held) <= 6
    assert server.session_flagged
    last = server.loop.records[-1]
    assert last.action.as_tuple() == FREEZE_ACTION.as_tuple()
    driver.close()


def test_disconnected_driver_freezes_car(tiny_policies):
    server = _server(tiny_policies, tick_hz=100.0, max_ticks=200)
    thread = server.start()
    driver = Client(server.port, role="driver")
    driver.recv_type("hello")
    state = driver.recv_type("state")
    driver.send(wire.input_msg(state["tick"], 0.0, 1.0, 0.0))
    time.sleep(0.1)
    driver.close()
    thread.join(timeout=15)
    assert server.session_flagged
    assert server.loop.records[-1].action.as_tuple() == FREEZE_ACTION.as_tuple()


def test_bad_message_gets_error_reply(tiny_policies):
    server = _server(tiny_policies, tick_hz=100.0, max_ticks=300)
    thread = server.start()
    c = Client(server.port, role="driver")
    c.recv_type("hello")
    c.sock.sendall(b'{"v":1,"type":"input","tick":0,"steer":9,"throttle":0,"brake":0}\n')
    err = c.recv_type("error")
    assert err is not None and "steer" in err["detail"]
    server.stop()
    thread.join(timeout=10)
    c.close()


def test_batch_live_equivalence_lockstep(tiny_policies):
    """Replaying a recorded input stream through the socket reproduces the batch loop."""
    evaluator, copilot = tiny_policies
    track = generate_track(3, TrackParams())
    driver = ExpertDriver(CFG)

    # batch reference: drive the loop directly
    batch_loop = ControlLoop(
        track=track,
        car=start_state(track, 0.0),
        evaluator=evaluator,
        copilot=copilot,
        handover_cfg=HandoverConfig(tau_nll=1e9),
        sim_cfg=CFG,
        loop_cfg=LoopConfig(),
        encoder=None,
        seed=7,
    )
    inputs = []
    for _ in range(40):
        a = driver.act(track, batch_loop.car)
        inputs.append(a.as_tuple())
        batch_loop.step(a)
    batch_actions = [r.action.as_tuple() for r in batch_loop.records]

    # live: replay the same inputs in lockstep
    server = _server(tiny_policies, lockstep=True, max_ticks=40)
    thread = server.start()
    client = Client(server.port, role="driver")
    client.recv_type("hello")
    client.recv_type("track")

    live_actions = []
    for tick, (s, t, b) in enumerate(inputs):
        client.send(wire.input_msg(tick, s, t, b))
        state = client.recv_type("state")
        assert state["tick"] == tick
        live_actions.append(tuple(state["action"]))
    thread.join(timeout=20)
    assert live_actions == batch_actions
    client.close()
