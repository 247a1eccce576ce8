"""Live teleoperation service for steering the controller rig.

A session owns one simulation exclusively: it steps the chain at the fixed
physics timestep, applies operator commands only at step boundaries in
arrival order, and emits snapshots at a configurable cadence decoupled
from the physics.  Rig motion is accumulated as piecewise-constant
velocity segments and the rig pose is always evaluated through the same
closed-form segment integration used for script playback, so a recorded
session converts to a script whose replay reproduces the trajectory step
for step.

Transport is a WebSocket speaking JSON text frames; see docs/formats.md
for the message schema.
"""

from __future__ import annotations

import asyncio
import math
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .chain import Config, Environment, SimParams, end_gap, step, total_energy
from .control import (
    ControlScript,
    bench_environment,
    beta_start,
    epm_pose_at,
    epm_rig,
    hold,
    rotate,
    translate,
)
from .errors import DivergenceError, ValidationError
from .geometry import Pose
from .scenarios import calibrated_model
from .states import classify, moment_alignment

PROTOCOL_VERSION = 1
MAX_LINEAR_SPEED = 0.05  # m/s per component cap on commanded rig velocity
MAX_ANGULAR_RATE = 15.0  # rad/s
DEFAULT_SNAPSHOT_RATE = 30.0  # snapshots per second

# rig start matching the built-in script: below the chain midpoint, field up
DEFAULT_EPM_POSE = Pose(position=np.array([0.0375, -0.060, 0.0]))

SCENARIOS = ("beta-bench",)


def _unit_and_magnitude(v: np.ndarray):
    mag = float(np.linalg.norm(v))
    return (v / mag, mag) if mag > 0.0 else (None, 0.0)


def record_to_script(
    initial_pose: Pose,
    segments: list,
    dt: float,
    name: str = "recorded",
) -> ControlScript:
    """Convert piecewise-constant velocity segments into a motion script.

    ``segments`` is a list of (n_steps, linear 3-vector, angular 3-vector);
    each becomes a hold, translate, or rotate primitive of duration
    ``n_steps * dt``.  Mixed linear+angular segments are rejected, as is an
    empty recording.
    """
    prims = []
    for n_steps, lin, ang in segments:
        if n_steps <= 0:
            continue
        duration = n_steps * dt
        lin = np.asarray(lin, dtype=float)
        ang = np.asarray(ang, dtype=float)
        lin_axis, speed = _unit_and_magnitude(lin)
        ang_axis, rate = _unit_and_magnitude(ang)
        if speed > 0.0 and rate > 0.0:
            raise ValidationError(
                "recorded segment mixes linear and angular velocity"
            )
        if speed > 0.0:
            prims.append(translate(lin_axis, speed, duration))
        elif rate > 0.0:
            prims.append(rotate(ang_axis, rate, duration))
        else:
            prims.append(hold(duration))
    if not prims:
        raise ValidationError("recording is empty")
    return ControlScript(name=name, initial_pose=initial_pose.copy(), primitives=prims)


@dataclass
class SessionLimits:
    max_linear_speed: float = MAX_LINEAR_SPEED
    max_angular_rate: float = MAX_ANGULAR_RATE

    def to_dict(self) -> dict:
        return {
            "max_linear_speed": self.max_linear_speed,
            "max_angular_rate": self.max_angular_rate,
        }


class Session:
    """One teleoperated simulation: exclusive state, deterministic stepping."""

    def __init__(
        self,
        scenario: str = "beta-bench",
        params: SimParams | None = None,
        snapshot_rate: float = DEFAULT_SNAPSHOT_RATE,
        limits: SessionLimits | None = None,
    ):
        self.params = params or SimParams()
        self.snapshot_rate = snapshot_rate
        self.limits = limits or SessionLimits()
        self.steps_per_snapshot = max(1, int(round(1.0 / (snapshot_rate * self.params.timestep))))
        self._load(scenario)

    def _load(self, scenario: str):
        if scenario not in SCENARIOS:
            raise ValidationError(f"unknown scenario {scenario!r}; available: {list(SCENARIOS)}")
        self.scenario = scenario
        self.model = calibrated_model()
        self.base_env = bench_environment()
        self.q = beta_start(self.model)
        self.step_count = 0
        self.paused = False
        self.pose_origin = DEFAULT_EPM_POSE.copy()
        # closed segments: (n_steps, linear, angular); plus the open segment
        self.segments: list = []
        self.seg_start = 0
        self.linear = np.zeros(3)
        self.angular = np.zeros(3)
        self.recording = False
        self.record_start_index: int | None = None
        self.record_pose: Pose | None = None
        self.last_error: str | None = None
        self._stable = (self.q.copy(), 0)

    # -- rig pose ---------------------------------------------------------

    def _script_so_far(self, t_steps: int) -> ControlScript | None:
        segs = list(self.segments)
        open_steps = t_steps - self.seg_start
        if open_steps > 0:
            # pad the open segment one step past the query time so pose
            # evaluation never clamps to the partial total; this keeps the
            # arithmetic identical to replaying the finished script
            segs.append((open_steps + 1, self.linear, self.angular))
        prims = []
        dt = self.params.timestep
        for n, lin, ang in segs:
            if n <= 0:
                continue
            lin_axis, speed = _unit_and_magnitude(np.asarray(lin, dtype=float))
            ang_axis, rate = _unit_and_magnitude(np.asarray(ang, dtype=float))
            if speed > 0.0:
                prims.append(translate(lin_axis, speed, n * dt))
            elif rate > 0.0:
                prims.append(rotate(ang_axis, rate, n * dt))
            else:
                prims.append(hold(n * dt))
        if not prims:
            return None
        return ControlScript("session", self.pose_origin, prims)

    def epm_pose(self, t_steps: int | None = None) -> Pose:
        k = self.step_count if t_steps is None else t_steps
        script = self._script_so_far(k)
        if script is None:
            return self.pose_origin.copy()
        return epm_pose_at(script, k * self.params.timestep)

    def _close_segment(self):
        n = self.step_count - self.seg_start
        if n > 0:
            self.segments.append((n, self.linear.copy(), self.angular.copy()))
        self.seg_start = self.step_count

    # -- commands ---------------------------------------------------------

    def apply_command(self, kind: str, payload: dict) -> dict:
        """Apply one command at the current step boundary.

        Returns the ack payload; raises ValidationError (state unchanged)
        on a rejected command.
        """
        if kind == "set_epm_velocity":
            lin = np.asarray(payload.get("linear", (0.0, 0.0, 0.0)), dtype=float).reshape(3)
            ang = np.asarray(payload.get("angular", (0.0, 0.0, 0.0)), dtype=float).reshape(3)
            if not (np.all(np.isfinite(lin)) and np.all(np.isfinite(ang))):
                raise ValidationError("velocity components must be finite")
            if np.linalg.norm(lin) > self.limits.max_linear_speed + 1e-12:
                raise ValidationError(
                    f"linear speed {np.linalg.norm(lin):.3g} m/s exceeds the "
                    f"{self.limits.max_linear_speed:g} m/s cap"
                )
            if np.linalg.norm(ang) > self.limits.max_angular_rate + 1e-12:
                raise ValidationError(
                    f"angular rate {np.linalg.norm(ang):.3g} rad/s exceeds the "
                    f"{self.limits.max_angular_rate:g} rad/s cap"
                )
            if np.linalg.norm(lin) > 0.0 and np.linalg.norm(ang) > 0.0:
                raise ValidationError(
                    "simultaneous linear and angular velocity is not supported; "
                    "send one at a time"
                )
            self._close_segment()
            self.linear = lin
            self.angular = ang
            return {"linear": lin.tolist(), "angular": ang.tolist()}
        if kind == "set_epm_pose":
            if self.recording:
                raise ValidationError("cannot jump the rig pose while recording")
            pose = Pose.from_dict(payload)
            self._close_segment()
            self.segments = []
            self.seg_start = self.step_count
            self.linear = np.zeros(3)
            self.angular = np.zeros(3)
            self.pose_origin = pose
            return {"pose": pose.to_dict()}
        if kind == "pause":
            self.paused = True
            return {"paused": True}
        if kind == "resume":
            self.paused = False
            return {"paused": False}
        if kind == "reset":
            scenario = payload.get("scenario", self.scenario)
            self._load(scenario)
            return {"scenario": scenario}
        if kind == "start_recording":
            if self.recording:
                raise ValidationError("recording already running")
            self._close_segment()
            self.recording = True
            self.record_start_index = len(self.segments)
            self.record_pose = self.epm_pose()
            return {"recording": True, "t": self.sim_time}
        if kind == "stop_recording":
            if not self.recording:
                raise ValidationError("no recording is running")
            self._close_segment()
            script = record_to_script(
                self.record_pose,
                self.segments[self.record_start_index:],
                self.params.timestep,
                name=payload.get("name", "recorded"),
            )
            self.recording = False
            self.record_start_index = None
            self.record_pose = None
            return {"recording": False, "script": script.to_dict()}
        raise ValidationError(f"unknown command {kind!r}")

    # -- stepping ---------------------------------------------------------

    @property
    def sim_time(self) -> float:
        return self.step_count * self.params.timestep

    def _step_once(self):
        pose = self.epm_pose(self.step_count + 1)
        env = Environment(epm=epm_rig(pose), plates=self.base_env.plates,
                         gravity=self.base_env.gravity)
        self.q = step(self.model, self.q, env, self.params)
        self.step_count += 1

    def advance(self) -> dict:
        """Advance one snapshot interval (unless paused) and snapshot.

        On divergence the session reverts to the last snapshot state, zeroes
        the commanded velocity, and the snapshot carries the error message.
        """
        self.last_error = None
        if not self.paused:
            try:
                for _ in range(self.steps_per_snapshot):
                    self._step_once()
                self._stable = (self.q.copy(), self.step_count)
            except DivergenceError as exc:
                self.q, self.step_count = self._stable[0].copy(), self._stable[1]
                self._close_segment()
                self.linear = np.zeros(3)
                self.angular = np.zeros(3)
                self.last_error = str(exc)
        return self.snapshot()

    def snapshot(self) -> dict:
        pose = self.epm_pose()
        env = Environment(epm=epm_rig(pose), plates=self.base_env.plates,
                         gravity=self.base_env.gravity)
        e = total_energy(self.model, self.q, env, self.params)
        snap = {
            "t": self.sim_time,
            "config": {
                "base_pose": self.q.base_pose.to_dict(),
                "hinge_angles": self.q.hinge_angles.tolist(),
            },
            "epm_pose": pose.to_dict(),
            "label": classify(self.model, self.q).value,
            "energy": e.to_dict(),
            "end_gap_m": end_gap(self.model, self.q),
            "alignment": moment_alignment(self.model, self.q),
            "paused": self.paused,
            "recording": self.recording,
        }
        if self.last_error is not None:
            snap["error"] = self.last_error
        return snap

    def hello(self) -> dict:
        return {
            "protocol_version": PROTOCOL_VERSION,
            "scenario": self.scenario,
            "snapshot_rate": self.snapshot_rate,
            "timestep": self.params.timestep,
            "limits": self.limits.to_dict(),
            "scenarios": list(SCENARIOS),
        }


# ---------------------------------------------------------------------------
# WebSocket transport

def create_app(realtime: bool = True, snapshot_rate: float = DEFAULT_SNAPSHOT_RATE):
    """FastAPI application hosting one session per WebSocket connection."""
    app = FastAPI(title="magfold teleop")

    @app.get("/health")
    async def health():
        return {"ok": True, "protocol_version": PROTOCOL_VERSION}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session = Session(snapshot_rate=snapshot_rate)
        await ws.send_json({"type": "hello", "payload": session.hello()})
        queue: asyncio.Queue = asyncio.Queue()

        async def receiver():
            try:
                while True:
                    msg = await ws.receive_json()
                    await queue.put(msg)
            except WebSocketDisconnect:
                await queue.put(None)
            except Exception:
                await queue.put(None)

        recv_task = asyncio.create_task(receiver())
        interval = 1.0 / snapshot_rate

        async def handle(msg) -> bool:
            if msg is None:
                return False
            seq = msg.get("client_seq")
            try:
                payload = session.apply_command(msg.get("type"), msg.get("payload") or {})
                await ws.send_json({"type": "ack", "payload": payload,
                                    "client_seq": seq})
            except ValidationError as exc:
                await ws.send_json({"type": "error",
                                    "payload": {"message": str(exc)},
                                    "client_seq": seq})
            return True

        try:
            while True:
                closed = False
                if not realtime:
                    # lockstep pacing: block for at least one client message
                    # per snapshot so a test client controls exactly how many
                    # snapshot intervals elapse between its commands
                    closed = not await handle(await queue.get())
                while not closed and not queue.empty():
                    closed = not await handle(queue.get_nowait())
                if closed:
                    break
                snap = session.advance()
                await ws.send_json({"type": "snapshot", "payload": snap})
                if realtime:
                    await asyncio.sleep(interval)
        finally:
            recv_task.cancel()

    return app
