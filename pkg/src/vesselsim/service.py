"""Live teleoperation service and log replay over WebSocket.

One sim loop owns all mutable state and broadcasts an immutable snapshot frame
per tick; operator input frames coalesce latest-wins and are drained once per
tick, with velocities zero-held once input goes stale for more than
``STALE_TICKS`` ticks. Control frames (start / pause / reset / set_policy) are
applied between ticks. Malformed frames get an error frame back and the
session continues.

The same port also serves the browser console's static files (plain HTTP via
the WebSocket handshake hook), so `vesselsim serve` is self-contained.
"""

from __future__ import annotations

import asyncio
import base64
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from websockets.asyncio.server import ServerConnection, serve
from websockets.exceptions import ConnectionClosed
from websockets.http11 import Response

from .config import RunConfig, config_hash, from_dict
from .errors import PortBusyError
from .metrics import compute_basic_metrics
from .simulate import ContactDebouncer, OperatorInput, TrialScene, TrialSession, build_scene
from .triallog import TrialLog, dump_jsonl, load_jsonl

PROTOCOL_VERSION = 1
STALE_TICKS = 5  # input older than this many ticks -> zero velocity

CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
}


def _pack_occupancy(occupied: np.ndarray) -> str:
    return base64.b64encode(np.packbits(occupied.astype(np.uint8)).tobytes()).decode()


def scene_frame(scene: TrialScene, cfg: RunConfig, policy_name: str) -> dict:
    cost = scene.costmap.cost
    finite = np.isfinite(cost)
    heat = np.zeros(cost.shape, dtype=np.uint8)
    if finite.any():
        lo, hi = float(cost[finite].min()), float(cost[finite].max())
        span = hi - lo if hi > lo else 1.0
        heat[finite] = np.round((cost[finite] - lo) / span * 255).astype(np.uint8)
    return {
        "type": "scene",
        "v": PROTOCOL_VERSION,
        "grid": {
            "width": scene.grid.width,
            "height": scene.grid.height,
            "resolution_mm": scene.grid.resolution,
            "occupied_b64": _pack_occupancy(scene.grid.occupied),
            "cost_u8_b64": base64.b64encode(heat.tobytes()).decode(),
        },
        "plan": scene.plan.to_json_dict(),
        "start": [float(scene.start[0]), float(scene.start[1])],
        "goal": [float(scene.goal[0]), float(scene.goal[1])],
        "goal_radius_mm": cfg.sim.goal_radius_mm,
        "rod_length_mm": cfg.sim.rod_length_mm,
        "tip_radius_mm": cfg.sim.tip_radius_mm,
        "workspace_half_mm": cfg.sim.workspace_half_mm,
        "policy": policy_name,
        "alpha_max": 0.9,
        "calibration": {
            "f_baseline_n": cfg.control.f_baseline_n,
            "f_override_n": cfg.control.f_override_n,
        },
        "operator_v_max": cfg.operator.v_max,
        "dt": cfg.sim.dt,
        "plan_id": config_hash(cfg)[:16],
    }


def snapshot_frame(session: TrialSession, record, running: bool, plan_id: str) -> dict:
    return {
        "type": "snapshot",
        "v": PROTOCOL_VERSION,
        **record.to_dict(),
        "running": running,
        "policy": session.policy.name,
        "metrics": {
            "ct_s": (record.tick + 1) * session.cfg.sim.dt,
            "pl_cm": session.pl_mm / 10.0,
            "cc": session.debouncer.count,
            "goal_dist_mm": session.goal_dist,
        },
        "plan_id": plan_id,
    }


@dataclass
class _Inbox:
    """Latest-wins operator input with staleness tracking."""

    frame: dict | None = None
    received_tick: int = -(10**9)

    def put(self, frame: dict, tick: int) -> None:
        self.frame = frame
        self.received_tick = tick

    def drain(self, tick: int, baseline: float) -> OperatorInput:
        if self.frame is None or tick - self.received_tick > STALE_TICKS:
            return OperatorInput.idle(baseline)
        f = self.frame
        return OperatorInput(
            v_left=np.array(f["v_left"], dtype=float),
            v_right=np.array(f["v_right"], dtype=float),
            fsr_left=float(f["fsr_left"]),
            fsr_right=float(f["fsr_right"]),
        )


class LiveService:
    """Session state machine plus WebSocket fan-out."""

    def __init__(
        self,
        cfg: RunConfig,
        log_dir: Path | None = None,
        realtime: bool = True,
    ) -> None:
        self.cfg = cfg
        self.log_dir = log_dir
        self.realtime = realtime
        self.scene = build_scene(cfg)
        self.session = TrialSession(cfg, self.scene)
        self.running = False
        self.inbox = _Inbox()
        self.clients: set[ServerConnection] = set()
        self.finished_log: TrialLog | None = None
        self.config_hash = config_hash(cfg)
        self._lock = asyncio.Lock()

    # -- frame fan-out -------------------------------------------------------

    async def _broadcast(self, frame: dict) -> None:
        if not self.clients:
            return
        payload = json.dumps(frame)
        dead = []
        for ws in self.clients:
            try:
                await ws.send(payload)
            except ConnectionClosed:
                dead.append(ws)
        for ws in dead:
            self.clients.discard(ws)

    # -- control -------------------------------------------------------------

    async def _handle_control(self, ws: ServerConnection, msg: dict) -> None:
        kind = msg.get("type")
        if kind == "start":
            if self.session.done:
                await ws.send(json.dumps({"type": "error", "message": "session ended; reset first"}))
                return
            self.running = True
            await self._broadcast({"type": "ack", "action": "start"})
        elif kind == "pause":
            self.running = False
            await self._broadcast({"type": "ack", "action": "pause"})
        elif kind == "reset":
            self.running = False
            self.session = TrialSession(self.cfg, self.scene)
            self.finished_log = None
            self.inbox = _Inbox()
            await self._broadcast({"type": "ack", "action": "reset"})
            await self._broadcast(scene_frame(self.scene, self.cfg, self.session.policy.name))
        elif kind == "set_policy":
            policy_id = msg.get("id", "")
            self.session.set_policy(str(policy_id))
            await self._broadcast({"type": "ack", "action": "set_policy", "id": policy_id})
        else:
            await ws.send(
                json.dumps({"type": "error", "message": f"unknown frame type {kind!r}"})
            )

    # -- per-connection handler ------------------------------------------------

    async def handler(self, ws: ServerConnection) -> None:
        self.clients.add(ws)
        try:
            await ws.send(
                json.dumps(
                    {"type": "hello", "v": PROTOCOL_VERSION, "config_hash": self.config_hash}
                )
            )
            await ws.send(json.dumps(scene_frame(self.scene, self.cfg, self.session.policy.name)))
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise ValueError("frame must be an object")
                except (json.JSONDecodeError, ValueError) as exc:
                    await ws.send(json.dumps({"type": "error", "message": f"bad frame: {exc}"}))
                    continue
                if msg.get("type") == "input":
                    try:
                        self.inbox.put(
                            {
                                "v_left": [float(msg["v_left"][0]), float(msg["v_left"][1])],
                                "v_right": [float(msg["v_right"][0]), float(msg["v_right"][1])],
                                "fsr_left": float(msg["fsr_left"]),
                                "fsr_right": float(msg["fsr_right"]),
                            },
                            self.session.tick_index,
                        )
                    except (KeyError, TypeError, ValueError, IndexError) as exc:
                        await ws.send(
                            json.dumps({"type": "error", "message": f"bad input frame: {exc}"})
                        )
                else:
                    async with self._lock:
                        await self._handle_control(ws, msg)
        except ConnectionClosed:
            pass
        finally:
            self.clients.discard(ws)

    # -- sim loop --------------------------------------------------------------

    async def _end_session(self) -> None:
        self.running = False
        log = self.session.finalize()
        self.finished_log = log
        path = None
        if self.log_dir is not None:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            path = self.log_dir / f"live_{log.config_hash[:12]}_{int(time.time())}.jsonl"
            path.write_text(dump_jsonl(log))
        m = compute_basic_metrics(log, self.cfg.sim.debounce_ticks)
        await self._broadcast(
            {
                "type": "end",
                "status": log.status,
                "ticks": len(log.records),
                "metrics": {"CT": m.ct_s, "PL": m.pl_cm, "Va": m.va_cm_s, "CC": m.cc},
                "success": m.success,
                "log_path": str(path) if path else None,
            }
        )

    async def tick_once(self) -> dict | None:
        """Advance one tick if running; returns the broadcast snapshot frame."""
        if not self.running or self.session.done:
            return None
        async with self._lock:
            op = self.inbox.drain(self.session.tick_index, self.cfg.control.f_baseline_n)
            record = self.session.tick(op)
        frame = snapshot_frame(
            self.session, record, running=not self.session.done, plan_id=self.config_hash[:16]
        )
        await self._broadcast(frame)
        if self.session.done:
            async with self._lock:
                await self._end_session()
        return frame

    async def loop(self) -> None:
        dt = self.cfg.sim.dt
        next_deadline = time.monotonic()
        while True:
            await self.tick_once()
            if self.realtime:
                next_deadline += dt
                delay = next_deadline - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    next_deadline = time.monotonic()  # fell behind; don't burst
            else:
                await asyncio.sleep(0)


def _static_responder(static_dir: Path | None):
    def respond(connection: ServerConnection, request):
        if request.headers.get("Upgrade", "").lower() == "websocket":
            return None  # proceed with the WS handshake
        if static_dir is None:
            return connection.respond(404, "no static assets configured\n")
        name = request.path.split("?", 1)[0]
        if name in ("/", ""):
            name = "/index.html"
        target = (static_dir / name.lstrip("/")).resolve()
        if not str(target).startswith(str(static_dir.resolve())) or not target.is_file():
            return connection.respond(404, "not found\n")
        body = target.read_bytes()
        ctype = CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        response = Response(
            200, "OK", headers_from([("Content-Type", ctype), ("Content-Length", str(len(body)))]),
            body,
        )
        return response

    return respond


def headers_from(pairs):
    from websockets.datastructures import Headers

    h = Headers()
    for k, v in pairs:
        h[k] = v
    return h


async def serve_forever(
    cfg: RunConfig,
    host: str = "127.0.0.1",
    port: int = 8765,
    log_dir: Path | None = None,
    static_dir: Path | None = None,
    realtime: bool = True,
    ready: asyncio.Event | None = None,
) -> None:
    """Run the live teleoperation service until cancelled."""
    service = LiveService(cfg, log_dir=log_dir, realtime=realtime)
    try:
        async with serve(
            service.handler,
            host,
            port,
            process_request=_static_responder(static_dir),
        ) as server:
            if ready is not None:
                ready.set()
            loop_task = asyncio.create_task(service.loop())
            try:
                await server.serve_forever()
            finally:
                loop_task.cancel()
    except OSError as exc:
        raise PortBusyError(f"cannot bind {host}:{port}: {exc}") from exc


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------


class ReplayService:
    """Re-broadcast a recorded log's snapshots at a wall-clock speed multiple."""

    def __init__(self, log: TrialLog, speed: float = 1.0, realtime: bool = True) -> None:
        if speed <= 0:
            raise ValueError("speed must be > 0")
        self.log = log
        self.speed = speed
        self.realtime = realtime
        cfg_dict = log.config or {}
        self.cfg = from_dict(RunConfig, cfg_dict) if cfg_dict else RunConfig()
        self.scene = build_scene(self.cfg)

    async def handler(self, ws: ServerConnection) -> None:
        try:
            await ws.send(
                json.dumps(
                    {"type": "hello", "v": PROTOCOL_VERSION, "config_hash": self.log.config_hash, "replay": True}
                )
            )
            policy_name = self.log.meta.get("policy", "replay")
            await ws.send(json.dumps(scene_frame(self.scene, self.cfg, policy_name)))
            period = self.log.dt / self.speed
            pl_mm = 0.0
            prev_mid = None
            deb = ContactDebouncer(self.cfg.sim.debounce_ticks)
            next_deadline = time.monotonic()
            for record in self.log.records:
                mid = np.array(
                    [
                        (record.head[0] + record.tail[0]) / 2,
                        (record.head[1] + record.tail[1]) / 2,
                    ]
                )
                if prev_mid is not None:
                    pl_mm += float(np.hypot(*(mid - prev_mid)))
                prev_mid = mid
                for e in record.events:
                    if e.get("type") == "contact":
                        deb.feed(record.tick, e["endpoint"])
                frame = {
                    "type": "snapshot",
                    "v": PROTOCOL_VERSION,
                    **record.to_dict(),
                    "running": True,
                    "policy": self.log.meta.get("policy", "replay"),
                    "metrics": {
                        "ct_s": (record.tick + 1) * self.log.dt,
                        "pl_cm": pl_mm / 10.0,
                        "cc": deb.count,
                        "goal_dist_mm": 0.0,
                    },
                    "plan_id": self.log.config_hash[:16],
                }
                await ws.send(json.dumps(frame))
                if self.realtime:
                    # absolute deadlines so sleep overshoot cannot accumulate
                    next_deadline += period
                    delay = next_deadline - time.monotonic()
                    if delay > 0:
                        await asyncio.sleep(delay)
            await ws.send(
                json.dumps(
                    {"type": "end", "status": self.log.status, "ticks": len(self.log.records)}
                )
            )
        except ConnectionClosed:
            pass


async def replay_forever(
    log_path: Path,
    host: str = "127.0.0.1",
    port: int = 8765,
    speed: float = 1.0,
    realtime: bool = True,
    ready: asyncio.Event | None = None,
) -> None:
    log = load_jsonl(Path(log_path).read_text())
    service = ReplayService(log, speed=speed, realtime=realtime)
    try:
        async with serve(service.handler, host, port) as server:
            if ready is not None:
                ready.set()
            await server.serve_forever()
    except OSError as exc:
        raise PortBusyError(f"cannot bind {host}:{port}: {exc}") from exc
