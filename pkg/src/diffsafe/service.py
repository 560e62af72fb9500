"""Live control service: fixed-rate tick loop speaking the cockpit wire protocol.

One driver connection holds authority; any number of spectators watch. The
tick loop owns the control loop; per-client reader threads only enqueue parsed
input messages. Scoring runs inline in the tick (it fits the budget at desk
scale), which keeps batch and live runs bit-identical under replay.
"""

from __future__ import annotations

import json
import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .autonomy.handover import HandoverConfig
from .autonomy.loop import ControlLoop, LoopConfig
from .diffusion.policy import PolicyHead
from .nn import AutoencoderWeights
from .sim.track import Track, track_to_dict
from .sim.types import Action, CarState
from . import wire

FREEZE_ACTION = Action(steer=0.0, throttle=0.0, brake=1.0)
STALE_LIMIT = 5  # ticks of hold-last before the driver counts as absent


@dataclass
class _Client:
    sock: socket.socket
    role: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    alive: bool = True


class LiveServer:
    def __init__(
        self,
        track: Track,
        car: CarState,
        evaluator: PolicyHead,
        copilot: PolicyHead,
        handover_cfg: HandoverConfig,
        sim_cfg,
        loop_cfg: LoopConfig,
        encoder: AutoencoderWeights | None,
        seed: int,
        port: int,
        host: str = "127.0.0.1",
        tick_hz: float = 10.0,
        lockstep: bool = False,
        max_ticks: int | None = None,
        log_path: str | Path | None = None,
    ):
        self.loop = ControlLoop(
            track=track,
            car=car,
            evaluator=evaluator,
            copilot=copilot,
            handover_cfg=handover_cfg,
            sim_cfg=sim_cfg,
            loop_cfg=loop_cfg,
            encoder=encoder,
            seed=seed,
        )
        self.track = track
        self.tau = handover_cfg.tau_nll
        self.dt = sim_cfg.dt
        self.tick_period = 1.0 / tick_hz
        self.lockstep = lockstep
        self.max_ticks = max_ticks
        self.log_path = Path(log_path) if log_path else None

        self._sock = socket.create_server((host, port))
        self._sock.settimeout(0.2)
        self.port = self._sock.getsockname()[1]
        self._clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._driver: _Client | None = None
        self._inputs: list[tuple[int, int, dict]] = []  # (tick_stamp, arrival, msg)
        self._inputs_lock = threading.Lock()
        self._arrival = 0
        self._input_event = threading.Event()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self.session_flagged = False
        self._last_action = FREEZE_ACTION
        self._stale_ticks = 0
        self._ever_driver = False
        self.tick_durations: list[float] = []

    # -- client handling ---------------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _addr = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            t = threading.Thread(target=self._client_loop, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _client_loop(self, conn: socket.socket) -> None:
        conn.settimeout(0.5)
        reader = conn.makefile("rb")
        client: _Client | None = None
        try:
            while not self._stop.is_set():
                try:
                    line = reader.readline()
                except socket.timeout:
                    continue
                except OSError:
                    break
                if not line:
                    break
                try:
                    msg = wire.decode(line)
                except wire.WireError as e:
                    self._send_raw(conn, wire.error_msg(self.loop.tick, str(e)))
                    continue
                if msg["type"] == "hello" and client is None:
                    client = self._register(conn, msg)
                elif msg["type"] == "input" and client is not None and client.role == wire.ROLE_DRIVER:
                    with self._inputs_lock:
                        self._inputs.append((msg["tick"], self._arrival, msg))
                        self._arrival += 1
                    self._input_event.set()
        finally:
            if client is not None:
                self._drop(client)
            try:
                conn.close()
            except OSError:
                pass

    def _register(self, conn: socket.socket, hello: dict) -> _Client:
        wanted = hello.get("role", wire.ROLE_SPECTATOR)
        with self._clients_lock:
            if wanted == wire.ROLE_DRIVER and self._driver is None:
                role = wire.ROLE_DRIVER
            else:
                role = wire.ROLE_SPECTATOR
            client = _Client(sock=conn, role=role)
            self._clients.append(client)
            if role == wire.ROLE_DRIVER:
                self._driver = client
                self._ever_driver = True
                self._stale_ticks = 0
        self._send(client, wire.hello_msg(self.loop.tick, role, f"session-{id(self):x}", self.dt))
        self._send(client, wire.track_msg(self.loop.tick, track_to_dict(self.track)))
        return client

    def _drop(self, client: _Client) -> None:
        with self._clients_lock:
            client.alive = False
            if client in self._clients:
                self._clients.remove(client)
            if client is self._driver:
                self._driver = None
                self.session_flagged = True

    def _send_raw(self, conn: socket.socket, msg: dict) -> None:
        try:
            conn.sendall(wire.encode(msg))
        except OSError:
            pass

    def _send(self, client: _Client, msg: dict) -> None:
        with client.lock:
            try:
                client.sock.sendall(wire.encode(msg))
            except OSError:
                client.alive = False

    def _broadcast(self, msg: dict) -> None:
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            self._send(c, msg)
        for c in clients:
            if not c.alive:
                self._drop(c)

    # -- input selection ------------------------------------------------------------

    def _take_input(self, tick: int) -> dict | None:
        """Latest input (by tick stamp, then arrival) at or before this tick."""
        with self._inputs_lock:
            if not self._inputs:
                return None
            best = max(self._inputs, key=lambda item: (item[0], item[1]))
            self._inputs.clear()
        return best[2]

    def _wait_for_input(self, tick: int, timeout: float = 10.0) -> None:
        deadline = time.monotonic() + timeout
        while not self._stop.is_set() and time.monotonic() < deadline:
            with self._inputs_lock:
                if any(stamp >= tick for stamp, _, _ in self._inputs):
                    return
            self._input_event.wait(0.02)
            self._input_event.clear()

    # -- tick loop -------------------------------------------------------------------

    def _tick_action(self) -> tuple[Action, int, bool]:
        """(action to execute, staleness, frozen flag) for this tick."""
        with self._clients_lock:
            have_driver = self._driver is not None
        msg = self._take_input(self.loop.tick)
        if msg is not None:
            self._last_action = Action(steer=msg["steer"], throttle=msg["throttle"], brake=msg["brake"])
            self._stale_ticks = 0
            return self._last_action, 0, False
        if not have_driver:
            return FREEZE_ACTION, 0, True
        self._stale_ticks += 1
        if self._stale_ticks > STALE_LIMIT:
            self.session_flagged = True
            return FREEZE_ACTION, self._stale_ticks, True
        return self._last_action, self._stale_ticks, False

    def run(self) -> None:
        accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        accept_thread.start()
        log_file = open(self.log_path, "w") if self.log_path else None
        next_deadline = time.monotonic() + self.tick_period
        try:
            while not self._stop.is_set():
                if self.max_ticks is not None and self.loop.tick >= self.max_ticks:
                    break
                if self.lockstep:
                    self._wait_for_input(self.loop.tick)
                t0 = time.monotonic()
                action, stale, frozen = self._tick_action()
                record = self.loop.step(action)
                rec = record.to_json_dict()
                rec["stale_input"] = stale
                rec["frozen"] = frozen
                if log_file:
                    log_file.write(json.dumps(rec) + "\n")
                tick = record.tick
                self._broadcast(wire.state_msg(tick, rec))
                self._broadcast(wire.score_msg(tick, record.score, self.tau))
                self._broadcast(wire.handover_msg(tick, record.mode, record.gamma))
                self.tick_durations.append(time.monotonic() - t0)
                if not self.lockstep:
                    now = time.monotonic()
                    sleep = next_deadline - now
                    if sleep > 0:
                        time.sleep(sleep)
                    next_deadline = max(next_deadline + self.tick_period, now)
            self._broadcast(
                wire.result_msg(
                    self.loop.tick,
                    {"ticks": self.loop.tick, "flagged": self.session_flagged},
                )
            )
        finally:
            if log_file:
                log_file.close()
            self.shutdown()

    def start(self) -> threading.Thread:
        t = threading.Thread(target=self.run, daemon=True)
        t.start()
        return t

    def stop(self) -> None:
        self._stop.set()

    def shutdown(self) -> None:
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            try:
                c.sock.close()
            except OSError:
                pass
