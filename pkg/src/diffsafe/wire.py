"""Line-delimited JSON wire protocol between the live loop and cockpit clients.

Every message is one JSON object per line carrying `v` (schema version),
`type`, and `tick`. The full schema is published in
`schema/wire_protocol.schema.json`.
"""

from __future__ import annotations

import json
from typing import Any

WIRE_VERSION = 1

MSG_TYPES = ("hello", "state", "input", "handover", "score", "track", "result", "error")
ROLE_DRIVER = "driver"
ROLE_SPECTATOR = "spectator"


class WireError(ValueError):
    pass


def encode(msg: dict) -> bytes:
    return (json.dumps(msg, separators=(",", ":")) + "\n").encode("utf-8")


def decode(line: bytes | str) -> dict:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as e:
        raise WireError(f"not valid JSON: {e}") from e
    if not isinstance(msg, dict):
        raise WireError("message must be a JSON object")
    if msg.get("v") != WIRE_VERSION:
        raise WireError(f"unsupported wire version: {msg.get('v')!r}")
    mtype = msg.get("type")
    if mtype not in MSG_TYPES:
        raise WireError(f"unknown message type: {mtype!r}")
    if not isinstance(msg.get("tick"), int):
        raise WireError("message missing integer tick")
    if mtype == "input":
        _validate_input(msg)
    return msg


def _validate_input(msg: dict) -> None:
    for key, lo, hi in (("steer", -1.0, 1.0), ("throttle", 0.0, 1.0), ("brake", 0.0, 1.0)):
        v = msg.get(key)
        if not isinstance(v, (int, float)) or not lo <= float(v) <= hi:
            raise WireError(f"input.{key} must be a number in [{lo}, {hi}], got {v!r}")


def hello_msg(tick: int, role: str, session: str, dt: float) -> dict:
    return {"v": WIRE_VERSION, "type": "hello", "tick": tick, "role": role, "session": session, "dt": dt}


def track_msg(tick: int, track_dict: dict) -> dict:
    return {"v": WIRE_VERSION, "type": "track", "tick": tick, "track": track_dict}


def state_msg(tick: int, record: dict) -> dict:
    return {
        "v": WIRE_VERSION,
        "type": "state",
        "tick": tick,
        "state": record["state"],
        "action": record["action"],
        "off_road": record["off_road"],
        "collision": record["collision"],
        "stale_input": record.get("stale_input", 0),
        "frozen": record.get("frozen", False),
    }


def handover_msg(tick: int, mode: str, gamma: float | None) -> dict:
    return {"v": WIRE_VERSION, "type": "handover", "tick": tick, "mode": mode, "gamma": gamma}


def score_msg(tick: int, value: float | None, tau: float) -> dict:
    return {"v": WIRE_VERSION, "type": "score", "tick": tick, "value": value, "tau": tau}


def input_msg(tick: int, steer: float, throttle: float, brake: float) -> dict:
    return {
        "v": WIRE_VERSION,
        "type": "input",
        "tick": tick,
        "steer": steer,
        "throttle": throttle,
        "brake": brake,
    }


def result_msg(tick: int, summary: dict) -> dict:
    return {"v": WIRE_VERSION, "type": "result", "tick": tick, "summary": summary}


def error_msg(tick: int, detail: str) -> dict:
    return {"v": WIRE_VERSION, "type": "error", "tick": tick, "detail": detail}
