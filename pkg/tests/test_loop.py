import numpy as np
import pytest

from diffsafe.autonomy import (
    EXECUTOR_BLEND,
    ControlLoop,
    HandoverConfig,
    LoopConfig,
    MODE_COPILOT,
    MODE_HUMAN,
    MODE_TRANSITIONING,
)
from diffsafe.drivers import ExpertDriver, start_state
from diffsafe.sim import Action, SimConfig, TrackParams, generate_track

CFG = SimConfig()


def _loop(tiny_policies, tau=1e9, seed=0, executor="partial", track_seed=3):
    evaluator, copilot = tiny_policies
    track = generate_track(track_seed, TrackParams())
    hc = HandoverConfig(tau_nll=tau)
    return ControlLoop(
        track=track,
        car=start_state(track, 0.0),
        evaluator=evaluator,
        copilot=copilot,
        handover_cfg=hc,
        sim_cfg=CFG,
        loop_cfg=LoopConfig(executor=executor),
        encoder=None,
        seed=seed,
    ), track


def test_warmup_and_human_mode_pass_through(tiny_policies):
    loop, track = _loop(tiny_policies, tau=1e9)
    driver = ExpertDriver(CFG)
    for t in range(30):
        a = driver.act(track, loop.car)
        rec = loop.step(a)
        assert rec.mode == MODE_HUMAN
        assert rec.action == a  # bit-equal pass-through
        if t < 6:
            assert rec.score is None  # warmup: no scoring yet
    assert any(r.score is not None for r in loop.records)


def test_forced_trigger_ramp_and_copilot(tiny_policies):
    loop, track = _loop(tiny_policies, tau=1e9)
    driver = ExpertDriver(CFG)
    for _ in range(8):
        loop.step(driver.act(track, loop.car))
    loop.request_trigger()
    modes = []
    gammas = []
    for _ in range(10):
        rec = loop.step(driver.act(track, loop.car))
        modes.append(rec.mode)
        gammas.append(rec.gamma)
    assert modes[0] == MODE_TRANSITIONING
    assert gammas[:5] == pytest.approx([0.4, 0.55, 0.7, 0.85, 1.0])
    assert modes[5] == MODE_COPILOT
    assert set(modes[5:]) == {MODE_COPILOT}
    # during transition and afterwards the human input is no longer executed verbatim
    assert loop.trigger_tick == 8


def test_loop_deterministic_replay(tiny_policies):
    def run():
        loop, track = _loop(tiny_policies, tau=1e9, seed=11)
        driver = ExpertDriver(CFG)
        for t in range(10):
            loop.step(driver.act(track, loop.car))
        loop.request_trigger()
        for t in range(20):
            loop.step(driver.act(track, loop.car))
        return [r.action.as_tuple() for r in loop.records]

    assert run() == run()


def test_blend_executor_runs(tiny_policies):
    loop, track = _loop(tiny_policies, tau=1e9, executor=EXECUTOR_BLEND)
    driver = ExpertDriver(CFG)
    for _ in range(8):
        loop.step(driver.act(track, loop.car))
    loop.request_trigger()
    recs = [loop.step(driver.act(track, loop.car)) for _ in range(8)]
    assert recs[0].mode == MODE_TRANSITIONING
    assert recs[-1].mode == MODE_COPILOT


def test_run_log_records_schema(tiny_policies):
    loop, track = _loop(tiny_policies, tau=1e9)
    driver = ExpertDriver(CFG)
    for _ in range(5):
        loop.step(driver.act(track, loop.car))
    d = loop.records[-1].to_json_dict()
    assert d["v"] == 1
    assert set(d) >= {"tick", "mode", "gamma", "score", "action", "state", "off_road", "collision"}
    assert len(d["action"]) == 3 and len(d["state"]) == 5
