"""Long-running teleop service: the closed-loop engine on a real-time thread,
a websocket for commands and state streaming, and HTTP endpoints for health,
scenario inspection, and reset.

Three loops: control (100 Hz, owns the engine), perception (inside the engine
at its configured divisor), and network broadcast (30 Hz, latest-wins per
client). The control thread never blocks on client I/O; slow clients drop
frames.
"""
from __future__ import annotations

import asyncio
import collections
import contextlib
import threading
import time
import uuid

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from pydantic import TypeAdapter, ValidationError

from ..assist import ControlMode
from ..geometry import Pose, UnitQuaternion
from ..harness import Engine
from ..scenarios import Scenario
from . import models

CLIENT_VEL_CLAMP = 2.0      # m/s cap on finite-differenced client velocity
VEL_WINDOW = 3              # moving-average window for client velocity
DISCONNECT_DECAY = 0.2      # seconds to ramp held velocity to zero
ARM_INDEX = {"left": 0, "right": 1}


def _pose_model(pose: Pose) -> models.PoseModel:
    q = pose.orientation
    return models.PoseModel(pos=[float(x) for x in pose.position],
                            quat=[q.w, q.x, q.y, q.z])


class ArmInput:
    """Latest-wins command mailbox plus velocity estimation for one arm."""

    def __init__(self, pose: Pose):
        self.pose = pose
        self.velocity = np.zeros(3)
        self.gripper_closed = False
        self.last_t_ms: float | None = None
        self.samples: collections.deque = collections.deque(maxlen=VEL_WINDOW)
        self.decay_from: np.ndarray | None = None
        self.decay_start: float = 0.0

    def push_command(self, pos, quat, t_ms: float, fallback_dt: float) -> None:
        new = np.asarray(pos, dtype=np.float64)
        if self.last_t_ms is None:
            # First client command: no previous command to difference against
            # (the server's initial pose is not a client sample).
            raw = np.zeros(3)
        else:
            dt = fallback_dt
            if t_ms > self.last_t_ms:
                dt = min((t_ms - self.last_t_ms) / 1000.0, 0.5)
            raw = (new - self.pose.position) / max(dt, 1e-3)
            speed = float(np.linalg.norm(raw))
            if speed > CLIENT_VEL_CLAMP:
                raw = raw * (CLIENT_VEL_CLAMP / speed)
        self.samples.append(raw)
        self.velocity = np.mean(self.samples, axis=0)
        self.pose = Pose(new, UnitQuaternion(*quat))
        self.last_t_ms = t_ms
        self.decay_from = None

    def start_decay(self, now: float) -> None:
        self.decay_from = self.velocity.copy()
        self.decay_start = now

    def held_velocity(self, now: float) -> np.ndarray:
        if self.decay_from is None:
            return self.velocity
        frac = 1.0 - (now - self.decay_start) / DISCONNECT_DECAY
        if frac <= 0.0:
            return np.zeros(3)
        return self.decay_from * frac


class TeleopService:
    """Owns one engine and its real-time thread; exactly one active session."""

    def __init__(self, scenario: Scenario, realtime: bool = True):
        self.scenario = scenario
        self.session = uuid.uuid4().hex[:12]
        self.realtime = realtime
        self.lock = threading.Lock()
        self.engine = Engine(scenario)
        self.inputs = [ArmInput(self.engine.arms[i].human) for i in range(2)]
        self.clients: set[asyncio.Queue] = set()
        self.broadcast_seq = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._reset_requested = False

    # -- message handling (latest-wins mailboxes) ----------------------------

    def apply_message(self, msg: models.ClientMessage) -> models.AckMsg:
        """Apply a validated client message; state changes take effect on the
        next control tick."""
        with self.lock:
            if isinstance(msg, models.CommandMsg):
                arm = self.inputs[ARM_INDEX[msg.arm]]
                arm.push_command(msg.pos, msg.quat, msg.t_client_ms,
                                 1.0 / self.scenario.control_hz)
            elif isinstance(msg, models.GripperMsg):
                self.inputs[ARM_INDEX[msg.arm]].gripper_closed = msg.closed
            elif isinstance(msg, models.ModeMsg):
                self.engine.set_mode(ControlMode(msg.mode))
            elif isinstance(msg, models.ResetMsg):
                self._reset_requested = True
        return models.AckMsg(session=self.session, seq=msg.seq)

    def request_reset(self) -> None:
        with self.lock:
            self._reset_requested = True

    def _do_reset(self) -> None:
        mode = self.engine.mode  # the operator's mode selection survives resets
        self.engine = Engine(self.scenario)
        self.engine.set_mode(mode)
        self.inputs = [ArmInput(self.engine.arms[i].human) for i in range(2)]
        self._reset_requested = False

    # -- control thread -------------------------------------------------------

    def tick(self, now: float) -> None:
        """One control tick under the lock (also used directly by tests)."""
        with self.lock:
            if self._reset_requested:
                self._do_reset()
            for ai, inp in enumerate(self.inputs):
                self.engine.set_human(ai, inp.pose, inp.held_velocity(now))
                self.engine.set_gripper(ai, inp.gripper_closed)
            self.engine.tick_once()

    def _run(self) -> None:
        dt = 1.0 / self.scenario.control_hz
        next_tick = time.monotonic()
        while not self._stop.is_set():
            now = time.monotonic()
            if now < next_tick:
                time.sleep(min(next_tick - now, dt))
                continue
            self.tick(now)
            next_tick += dt
            if now - next_tick > 0.5:  # fell far behind; resync
                next_tick = now + dt

    def start(self) -> None:
        if self.realtime and self._thread is None:
            self._thread = threading.Thread(target=self._run, daemon=True,
                                            name="teleop-control")
            self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None

    # -- snapshots -------------------------------------------------------------

    def snapshot(self) -> models.StateUpdate:
        with self.lock:
            e = self.engine
            arms = []
            for ai, slot in enumerate(e.arms):
                ghost = None
                if slot.target is not None:
                    ghost = _pose_model(slot.target.pose)
                arms.append(models.ArmStateModel(
                    cmd_pose=_pose_model(slot.robot),
                    robot_pose=_pose_model(slot.robot),
                    ghost_pose=ghost,
                    engaged=slot.last_info.engaged,
                    h=slot.last_info.h,
                    gripper_closed=slot.gripper_closed,
                    grasped=slot.attached,
                ))
            metrics = models.MetricsModel(
                ticks=e.tick,
                pre_grasp_displacement=e.current_displacement(),
                min_barrier_value=e.min_barrier,
                grasp_achieved=e.arms[1].attached or e.arms[0].attached,
                success=e.success_tick is not None,
            )
            cbf = self.scenario.cbf
            barrier = models.BarrierParamsModel(z0=cbf.z0, zeta=cbf.zeta,
                                                sigma=cbf.sigma, eps=cbf.eps)
            self.broadcast_seq += 1
            return models.StateUpdate(
                tick=e.tick, mode=e.mode.value, arms=arms,
                rope=[[float(v) for v in p] for p in e.rope.particles],
                dlo_fine=[[float(v) for v in p] for p in e.dlo.fine],
                barrier=barrier,
                metrics=metrics, session=self.session, seq=self.broadcast_seq)

    def on_all_disconnected(self) -> None:
        now = time.monotonic()
        with self.lock:
            for inp in self.inputs:
                inp.start_decay(now)


_CLIENT_ADAPTER: TypeAdapter = TypeAdapter(models.ClientMessage)


def create_app(service: TeleopService, broadcast_hz: float = 30.0) -> FastAPI:
    app = FastAPI(title="assistdlo teleop service")
    app.state.service = service

    @contextlib.asynccontextmanager
    async def lifespan(_app):
        service.start()
        task = asyncio.create_task(_broadcast_loop(service, broadcast_hz))
        try:
            yield
        finally:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task
            service.stop()

    app.router.lifespan_context = lifespan

    @app.get("/health", response_model=models.HealthModel)
    def health():
        return models.HealthModel(status="ok", tick=service.engine.tick,
                                  session=service.session)

    @app.get("/scenario", response_model=models.ScenarioModel)
    def scenario():
        sc = service.scenario
        return models.ScenarioModel(name=sc.name, mode=sc.mode.value,
                                    rope_preset=sc.rope_preset,
                                    rope_layout=sc.rope_layout,
                                    duration_limit=sc.duration_limit,
                                    seed=sc.seed)

    @app.post("/reset")
    def reset():
        service.request_reset()
        return {"status": "reset", "session": service.session}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        queue: asyncio.Queue = asyncio.Queue(maxsize=1)
        service.clients.add(queue)
        sender = asyncio.create_task(_client_sender(ws, queue))
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = _CLIENT_ADAPTER.validate_json(text)
                except ValidationError as exc:
                    await ws.send_text(models.ErrorMsg(
                        session=service.session,
                        detail=str(exc.errors()[0]["msg"])).model_dump_json())
                    continue
                ack = service.apply_message(msg)
                await ws.send_text(ack.model_dump_json())
        except WebSocketDisconnect:
            pass
        finally:
            service.clients.discard(queue)
            sender.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await sender
            if not service.clients:
                service.on_all_disconnected()

    return app


async def _client_sender(ws: WebSocket, queue: asyncio.Queue) -> None:
    while True:
        text = await queue.get()
        await ws.send_text(text)


async def _broadcast_loop(service: TeleopService, hz: float) -> None:
    period = 1.0 / hz
    while True:
        await asyncio.sleep(period)
        if not service.clients:
            continue
        text = service.snapshot().model_dump_json()
        for queue in list(service.clients):
            if queue.full():  # latest wins; a slow client drops frames
                with contextlib.suppress(asyncio.QueueEmpty):
                    queue.get_nowait()
            with contextlib.suppress(asyncio.QueueFull):
                queue.put_nowait(text)


def serve(scenario: Scenario, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Run the service until interrupted (CLI entry)."""
    import uvicorn

    service = TeleopService(scenario)
    app = create_app(service)
    uvicorn.run(app, host=host, port=port, log_level="warning")
