"""Browser teleoperation bridge.

A session owns one simulated world. Clients send pose targets and gripper
commands over a websocket; the session runs differential IK toward the
held target at a fixed tick, steps the simulator, feeds the demonstration
recorder, and streams state updates carrying task-state indication. The
same port serves the UI bundle over plain HTTP.

Wire protocol v1, JSON text frames, sequence numbers strictly increasing
per direction:
  client -> server: hello, set_target {p, q}, set_gripper {open},
                    record_start, record_stop, reset {seed?}
  server -> client: hello {tick_hz, scene, chain}, state {...}, error {reason}

A state update carries: tick, step_count, joint angles, the 9 entity poses
(6 arm joints, gripper finger, end-effector, target object), per-task
status (success / in_progress / violated), active task, terminal cause,
recording flag, applied gripper command and the echoed IK target.
"""

from __future__ import annotations

import asyncio
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .configio import sha256_file
from .demonstrations import EpisodeRecorder, save as save_demos
from .environment import GraspEnv, TerminalCause, load_scene
from .kinematics import IkConfig, ik_step, load_chain
from .tasks import ALL_TASKS
from .transforms import Pose

WIRE_VERSION = 1

CLIENT_TYPES = ("hello", "set_target", "set_gripper", "record_start",
                "record_stop", "reset")


def _pose_wire(p, q) -> dict:
    return {"p": [float(x) for x in p], "q": [float(x) for x in q]}


@dataclass
class SessionConfig:
    tick_hz: float = 30.0
    demo_out: str = "teleop_demos.jsonl"
    seed: int = 0
    recorder_id: str = "teleop"


class Session:
    """Synchronous session core: all behavior lives in handle_message and
    tick so the loop is deterministic and directly testable."""

    def __init__(self, env: GraspEnv, config: SessionConfig,
                 scene_hash: str = "", chain_hash: str = "",
                 session_id: str = "s0"):
        self.env = env
        self.config = config
        self.session_id = session_id
        self.scene_hash = scene_hash
        self.chain_hash = chain_hash
        self.rng = np.random.default_rng(config.seed)
        self.state = env.reset(self.rng)
        self.target: Pose | None = None
        self.gripper_open = 1.0          # commanded open fraction
        self.recorder = EpisodeRecorder(scene_hash, chain_hash,
                                        config.recorder_id)
        self.recording = False
        self.ik_config = IkConfig()
        self.tick_count = 0
        self.server_seq = 0
        self.last_client_seq = 0
        self.received_any_command = False

    # ------------------------------------------------------------ messages

    def _error(self, reason: str) -> dict:
        self.server_seq += 1
        return {"type": "error", "seq": self.server_seq, "reason": reason}

    def _hello(self) -> dict:
        self.server_seq += 1
        return {"type": "hello", "seq": self.server_seq,
                "version": WIRE_VERSION, "tick_hz": self.config.tick_hz,
                "scene": self.env.scene.name,
                "session": self.session_id}

    def handle_message(self, msg) -> dict | None:
        """Apply one wire message; returns an immediate reply or None."""
        if not isinstance(msg, dict):
            return self._error("message must be an object")
        mtype = msg.get("type")
        if mtype not in CLIENT_TYPES:
            return self._error(f"unknown message type {mtype!r}")
        seq = msg.get("seq")
        if not isinstance(seq, int) or seq <= self.last_client_seq:
            return self._error(f"out-of-order sequence {seq!r} "
                               f"(last {self.last_client_seq}); dropped")
        self.last_client_seq = seq

        if mtype == "hello":
            if msg.get("version") not in (None, WIRE_VERSION):
                return self._error(f"unsupported version {msg.get('version')}")
            return self._hello()

        self.received_any_command = True
        if mtype == "set_target":
            try:
                p = np.asarray(msg["p"], float).reshape(3)
                q = np.asarray(msg["q"], float).reshape(4)
            except (KeyError, TypeError, ValueError):
                return self._error("malformed target payload")
            if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
                return self._error("invalid orientation")
            if abs(np.linalg.norm(q) - 1.0) > 1e-6:
                return self._error("invalid orientation")
            self.target = Pose(p, q)
        elif mtype == "set_gripper":
            try:
                v = float(msg["open"])
            except (KeyError, TypeError, ValueError):
                return self._error("malformed gripper payload")
            if math.isnan(v):
                return self._error("malformed gripper payload")
            self.gripper_open = min(1.0, max(0.0, v))
        elif mtype == "record_start":
            if not self.recording:
                self.recording = True
                if not self.recorder.open:
                    self.recorder.begin_episode(self.state,
                                                self.env.observe(self.state))
        elif mtype == "record_stop":
            self._stop_recording()
        elif mtype == "reset":
            if "seed" in msg and msg["seed"] is not None:
                self.rng = np.random.default_rng(int(msg["seed"]))
            self._stop_recording()
            self.state = self.env.reset(self.rng)
            self.target = None
            self.gripper_open = 1.0
        return None

    def _stop_recording(self) -> None:
        if self.recorder.open:
            # a manual stop has no simulator cause; file it as a timeout
            self.recorder.end_episode(TerminalCause.TIMEOUT)
        if self.recording and len(self.recorder.dataset()):
            save_demos(self.recorder.dataset(), self.config.demo_out)
        self.recording = False

    # ------------------------------------------------------------ tick

    def _action(self) -> np.ndarray:
        dt = self.env.scene.dt
        action = np.zeros(7)
        if self.target is not None:
            dtheta = ik_step(self.env.chain, self.state.joint_state,
                             self.target, self.ik_config)
            action[:6] = dtheta / dt
        g = self.env.chain.gripper
        target_angle = g.limit_lo + (1.0 - self.gripper_open) \
            * (g.limit_hi - g.limit_lo)
        action[6] = (target_angle - self.state.joint_state.angles[6]) / dt
        return action

    def tick(self) -> dict | None:
        """One IK + simulation step; returns the state update to stream.

        Frozen (returns None) until the first client command ever arrives.
        After terminal, updates keep streaming but the world stops until a
        reset.
        """
        if not self.received_any_command:
            return None
        self.tick_count += 1
        if self.state.terminal is None:
            action = self._action()
            out = self.env.step(self.state, action)
            if self.recording and self.recorder.open:
                self.recorder.record_step(self.state, action, out)
                if out.terminal is not None:
                    save_demos(self.recorder.dataset(), self.config.demo_out)
                    self.recording = False
            self.state = out.state
        return self._state_update()

    def _state_update(self) -> dict:
        from .kinematics import fk_raw

        self.server_seq += 1
        raw = fk_raw(self.env.chain, self.state.joint_state.angles)
        statuses = self.env.task_statuses(self.state)
        return {
            "type": "state",
            "seq": self.server_seq,
            "tick": self.tick_count,
            "step_count": self.state.step_count,
            "joints": [float(a) for a in self.state.joint_state.angles],
            "entities": {
                "arm": [_pose_wire(p, q) for p, q in raw[:6]],
                "gripper": _pose_wire(*raw[6]),
                "ee": _pose_wire(*raw[7]),
                "target": _pose_wire(self.state.object_pose.p,
                                     self.state.object_pose.q),
            },
            "grasp_point": [float(x) for x in self.state.grasp_point],
            "grasp_direction": [float(x) for x in self.state.grasp_direction],
            "task_status": {int(t): statuses[t].value for t in ALL_TASKS},
            "active_task": int(self.state.active_task),
            "terminal": self.state.terminal.value if self.state.terminal else None,
            "recording": self.recording,
            "gripper_open": self.gripper_open,
            "ik_target": _pose_wire(self.target.p, self.target.q)
            if self.target is not None else None,
        }

    def close(self) -> None:
        self._stop_recording()


# ---------------------------------------------------------------- serving


def _static_response(ui_dir: Path, path: str):
    from websockets.http11 import Response
    from websockets.datastructures import Headers

    name = "index.html" if path in ("/", "") else path.lstrip("/")
    file = (ui_dir / name).resolve()
    if not str(file).startswith(str(ui_dir.resolve())) or not file.is_file():
        return Response(404, "Not Found", Headers([("Content-Type", "text/plain")]),
                        b"not found")
    ctype = {
        ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
        ".map": "application/json", ".svg": "image/svg+xml",
    }.get(file.suffix, "application/octet-stream")
    body = file.read_bytes()
    return Response(200, "OK", Headers([("Content-Type", ctype),
                                        ("Content-Length", str(len(body)))]),
                    body)


def default_ui_dir() -> Path | None:
    here = Path(__file__).resolve()
    for base in (here.parents[2] / "frontend" / "dist",
                 here.parents[1] / "frontend" / "dist",
                 Path.cwd() / "frontend" / "dist"):
        if base.is_dir():
            return base
    return None


async def serve_async(port: int = 8750, scene=None, chain=None,
                      tick_hz: float = 30.0, demo_out: str = "teleop_demos.jsonl",
                      ui_dir: Path | None = None, seed: int = 0,
                      ready: asyncio.Event | None = None):
    from websockets.asyncio.server import serve as ws_serve

    from .cli import build_env

    env, scene_path, chain_path = build_env(scene, chain)
    scene_hash = sha256_file(scene_path)
    chain_hash = sha256_file(chain_path)
    ui = ui_dir or default_ui_dir()
    counter = {"n": 0}

    async def handler(ws):
        counter["n"] += 1
        session = Session(env, SessionConfig(tick_hz=tick_hz, demo_out=demo_out,
                                             seed=seed + counter["n"]),
                          scene_hash, chain_hash, f"s{counter['n']}")
        stop = asyncio.Event()

        async def ticker():
            interval = 1.0 / tick_hz
            while not stop.is_set():
                update = session.tick()
                if update is not None:
                    await ws.send(json.dumps(update))
                await asyncio.sleep(interval)

        tick_task = asyncio.create_task(ticker())
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    msg = raw
                reply = session.handle_message(msg)
                if reply is not None:
                    await ws.send(json.dumps(reply))
        finally:
            stop.set()
            tick_task.cancel()
            session.close()

    def process_request(connection, request):
        if request.headers.get("Upgrade", "").lower() == "websocket":
            return None
        if ui is None:
            from websockets.http11 import Response
            from websockets.datastructures import Headers
            body = (b"<html><body><h3>teleop server running</h3>"
                    b"<p>UI bundle not built; connect a websocket client to "
                    b"this port.</p></body></html>")
            return Response(200, "OK", Headers([("Content-Type", "text/html")]),
                            body)
        return _static_response(ui, request.path)

    async with ws_serve(handler, "0.0.0.0", port,
                        process_request=process_request):
        print(f"teleop server on http://localhost:{port} "
              f"(scene {env.scene.name}, {tick_hz:.0f} Hz)", flush=True)
        if ready is not None:
            ready.set()
        await asyncio.Future()


def serve(port: int = 8750, scene=None, chain=None, tick_hz: float = 30.0,
          demo_out: str = "teleop_demos.jsonl", ui_dir=None, seed: int = 0):
    try:
        asyncio.run(serve_async(port, scene, chain, tick_hz, demo_out,
                                ui_dir, seed))
    except KeyboardInterrupt:
        pass
