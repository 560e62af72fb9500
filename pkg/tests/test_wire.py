import json
from pathlib import Path

import pytest

from diffsafe import wire

SCHEMA_PATH = Path(__file__).resolve().parents[1] / "schema" / "wire_protocol.schema.json"


def test_encode_decode_roundtrip():
    msg = wire.input_msg(5, steer=-0.5, throttle=0.8, brake=0.0)
    out = wire.decode(wire.encode(msg))
    assert out == msg


def test_decode_rejects_bad_messages():
    with pytest.raises(wire.WireError, match="JSON"):
        wire.decode(b"{not json")
    with pytest.raises(wire.WireError, match="version"):
        wire.decode(json.dumps({"v": 2, "type": "state", "tick": 0}))
    with pytest.raises(wire.WireError, match="type"):
        wire.decode(json.dumps({"v": 1, "type": "teleport", "tick": 0}))
    with pytest.raises(wire.WireError, match="tick"):
        wire.decode(json.dumps({"v": 1, "type": "state"}))
    with pytest.raises(wire.WireError, match="steer"):
        wire.decode(json.dumps({"v": 1, "type": "input", "tick": 0, "steer": 7, "throttle": 0, "brake": 0}))


def test_messages_validate_against_published_schema():
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads(SCHEMA_PATH.read_text())
    validator = jsonschema.Draft202012Validator(schema)
    samples = [
        wire.hello_msg(0, "driver", "s-1", 0.1),
        wire.input_msg(3, 0.1, 0.5, 0.0),
        wire.state_msg(
            4,
            {
                "state": [0.0, 1.0, 0.5, 0.0, 0.1],
                "action": [0.0, 0.3, 0.0],
                "off_road": False,
                "collision": False,
                "stale_input": 0,
                "frozen": False,
            },
        ),
        wire.handover_msg(5, "transitioning", 0.55),
        wire.score_msg(6, 0.8, 1.2),
        wire.score_msg(7, None, 1.2),
        wire.result_msg(8, {"ticks": 8}),
        wire.error_msg(9, "boom"),
    ]
    from diffsafe.sim import generate_track, track_to_dict

    samples.append(wire.track_msg(1, track_to_dict(generate_track(0))))
    for msg in samples:
        validator.validate(msg)
