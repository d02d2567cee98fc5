"""Live control service: steer a trained subgoal agent over a wire protocol.

Clients create a session (environment + checkpoint), place waypoints while
the agent moves, and stream its position. One JSON object per frame, with a
versioned "v" field and a "kind" discriminator:

  client -> server: {"v":1,"kind":"create","checkpoint":...,"tick_rate":...}
                    {"v":1,"kind":"place_goal","x":3,"y":4}
                    {"v":1,"kind":"clear_goals"} | {"kind":"step"} | {"kind":"reset"}
  server -> client: {"v":1,"kind":"created","session":id,...}
                    {"v":1,"kind":"state","step":n,"pos":[x,y],...}
                    {"v":1,"kind":"ack",...} | {"v":1,"kind":"error","message":...}

State frames carry a strictly increasing step index per session (idle ticks
acknowledge without a state frame). The same endpoints exist as plain
request/response routes under /sessions for curl-style clients. Dispatch
follows the scenario module's nearest-first rule via the shared
MissionDriver, so a scripted replay of a batch scenario's waypoints in
manual-step mode reproduces run_scenario's trace exactly.
"""

from __future__ import annotations

import asyncio
import uuid
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from gridgoal.grid import GridEnv
from gridgoal.layouts import resolve_env
from gridgoal.scenario import MissionDriver
from gridgoal.subgoal import SubgoalAgent
from gridgoal.training import load_checkpoint

PROTOCOL_VERSION = 1


class CreateSession(BaseModel):
    checkpoint: str
    layout: str | None = None  # default: the checkpoint's own environment
    tick_rate: float = Field(default=0.0, ge=0.0)  # 0 = manual stepping only
    greedy: bool = True
    seed: int = 0
    start: tuple[int, int] | None = None
    final_target: tuple[int, int] | None = None
    per_subgoal_budget: int | None = None
    total_horizon: int | None = None


class Session:
    def __init__(self, sid: str, env: GridEnv, agent: SubgoalAgent, cfg: CreateSession):
        self.id = sid
        self.env = env
        self.agent = agent
        self.cfg = cfg
        self.lock = asyncio.Lock()
        self.subscribers: list[asyncio.Queue] = []
        self.ticker: asyncio.Task | None = None
        self.driver = self._new_driver()

    def _new_driver(self) -> MissionDriver:
        return MissionDriver(
            self.env, self.agent, start=self.cfg.start,
            final_target=self.cfg.final_target,
            per_subgoal_budget=self.cfg.per_subgoal_budget,
            total_horizon=self.cfg.total_horizon,
            greedy=self.cfg.greedy, seed=self.cfg.seed,
        )

    @property
    def status(self) -> str:
        if self.driver.done:
            return "done"
        if self.driver.current is not None or self.driver.queue:
            return "running"
        return "idle"

    def state_frame(self, last: dict | None = None) -> dict:
        d = self.driver
        frame = {
            "v": PROTOCOL_VERSION,
            "kind": "state",
            "session": self.id,
            "step": d.steps,
            "pos": list(d.state.pos),
            "stage": d.state.stage,
            "has_key": d.state.has_bonus,
            "status": self.status,
            "current_goal": list(d.current) if d.current else None,
            "queue": [list(g) for g in d.queue],
            "reached": [[list(g), s] for g, s in d.reached],
            "success": d.success,
        }
        if last:
            for key in ("event", "reached_goal", "timed_out_goal"):
                if key in last:
                    frame[key] = last[key] if not isinstance(last[key], tuple) else list(last[key])
        return frame

    async def broadcast(self, frame: dict) -> None:
        for q in list(self.subscribers):
            await q.put(frame)

    async def do_step(self) -> dict:
        """One tick under the session lock; returns the frame to send."""
        async with self.lock:
            if self.driver.done:
                return {"v": PROTOCOL_VERSION, "kind": "error", "session": self.id,
                        "message": "session is done"}
            info = self.driver.step()
            if info.get("idle"):
                return {"v": PROTOCOL_VERSION, "kind": "ack", "session": self.id,
                        "idle": True, "step": self.driver.steps}
            frame = self.state_frame(info)
            await self.broadcast(frame)
            return frame


def create_app(checkpoint_root: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="gridgoal control service")
    sessions: dict[str, Session] = {}
    app.state.sessions = sessions

    def err(message: str, status: int = 400) -> JSONResponse:
        return JSONResponse({"v": PROTOCOL_VERSION, "kind": "error", "message": message},
                            status_code=status)

    def build_session(cfg: CreateSession) -> Session:
        path = Path(cfg.checkpoint)
        if checkpoint_root is not None and not path.is_absolute():
            path = Path(checkpoint_root) / path
        ckpt = load_checkpoint(path)
        if cfg.layout:
            env = resolve_env(cfg.layout, terminal_on_target=False)
            if env.family != ckpt.env.family:
                raise ValueError(f"layout family {env.family} does not match checkpoint "
                                 f"family {ckpt.env.family}")
        else:
            env = GridEnv(ckpt.env.stages, family=ckpt.env.family,
                          horizon=ckpt.env.horizon, terminal_on_target=False)
        if cfg.total_horizon is not None and cfg.total_horizon >= env.horizon:
            env = GridEnv(env.stages, family=env.family, horizon=cfg.total_horizon + 1,
                          terminal_on_target=False)
        sid = uuid.uuid4().hex[:12]
        return Session(sid, env, ckpt.subgoal_agent, cfg)

    async def start_ticker(session: Session) -> None:
        if session.cfg.tick_rate <= 0 or session.ticker is not None:
            return

        async def loop() -> None:
            period = 1.0 / session.cfg.tick_rate
            while not session.driver.done:
                await session.do_step()
                await asyncio.sleep(period)

        session.ticker = asyncio.create_task(loop())

    @app.post("/sessions")
    async def create_session(cfg: CreateSession):
        try:
            session = build_session(cfg)
        except (ValueError, OSError) as exc:
            return err(str(exc))
        sessions[session.id] = session
        await start_ticker(session)
        return {"v": PROTOCOL_VERSION, "kind": "created", "session": session.id,
                "state": session.state_frame()}

    def get_session(sid: str) -> Session | None:
        return sessions.get(sid)

    @app.get("/sessions/{sid}/state")
    async def session_state(sid: str):
        session = get_session(sid)
        if session is None:
            return err(f"unknown session {sid}", 404)
        async with session.lock:
            return session.state_frame()

    @app.post("/sessions/{sid}/goals")
    async def place_goal(sid: str, goal: dict):
        session = get_session(sid)
        if session is None:
            return err(f"unknown session {sid}", 404)
        try:
            g = (int(goal["x"]), int(goal["y"]))
        except (KeyError, TypeError, ValueError):
            return err("goal payload must carry integer x and y")
        async with session.lock:
            try:
                session.driver.place_goal(g)
            except ValueError as exc:
                return err(str(exc))
            return {"v": PROTOCOL_VERSION, "kind": "ack", "session": sid,
                    "queued": list(g), "queue_len": len(session.driver.queue)}

    @app.post("/sessions/{sid}/clear_goals")
    async def clear_goals(sid: str):
        session = get_session(sid)
        if session is None:
            return err(f"unknown session {sid}", 404)
        async with session.lock:
            session.driver.clear_goals()
            return {"v": PROTOCOL_VERSION, "kind": "ack", "session": sid, "queue_len": 0}

    @app.post("/sessions/{sid}/step")
    async def manual_step(sid: str):
        session = get_session(sid)
        if session is None:
            return err(f"unknown session {sid}", 404)
        frame = await session.do_step()
        status = 400 if frame.get("kind") == "error" else 200
        return JSONResponse(frame, status_code=status)

    @app.post("/sessions/{sid}/reset")
    async def reset_session(sid: str):
        session = get_session(sid)
        if session is None:
            return err(f"unknown session {sid}", 404)
        async with session.lock:
            session.driver = session._new_driver()
            return {"v": PROTOCOL_VERSION, "kind": "ack", "session": sid, "reset": True}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session: Session | None = None
        queue: asyncio.Queue = asyncio.Queue()

        async def send(obj: dict) -> None:
            await ws.send_json(obj)

        forward_task: asyncio.Task | None = None
        try:
            while True:
                msg = await ws.receive_json()
                kind = msg.get("kind")
                if msg.get("v") != PROTOCOL_VERSION:
                    await send({"v": PROTOCOL_VERSION, "kind": "error",
                                "message": f"unsupported protocol version {msg.get('v')!r}"})
                    continue
                if kind == "create":
                    if session is not None:
                        await send({"v": PROTOCOL_VERSION, "kind": "error",
                                    "message": "session already created on this connection"})
                        continue
                    attach = msg.get("session")
                    if attach:
                        session = sessions.get(attach)
                        if session is None:
                            await send({"v": PROTOCOL_VERSION, "kind": "error",
                                        "message": f"unknown session {attach}"})
                            continue
                    else:
                        try:
                            cfg = CreateSession(**{k: v for k, v in msg.items()
                                                   if k not in ("v", "kind")})
                            session = build_session(cfg)
                        except Exception as exc:
                            await send({"v": PROTOCOL_VERSION, "kind": "error", "message": str(exc)})
                            continue
                        sessions[session.id] = session
                        await start_ticker(session)
                    session.subscribers.append(queue)

                    async def forward() -> None:
                        while True:
                            await send(await queue.get())

                    forward_task = asyncio.create_task(forward())
                    await send({"v": PROTOCOL_VERSION, "kind": "created",
                                "session": session.id, "state": session.state_frame()})
                elif session is None:
                    await send({"v": PROTOCOL_VERSION, "kind": "error",
                                "message": "create a session first"})
                elif kind == "place_goal":
                    try:
                        g = (int(msg["x"]), int(msg["y"]))
                    except (KeyError, TypeError, ValueError):
                        await send({"v": PROTOCOL_VERSION, "kind": "error",
                                    "message": "place_goal needs integer x and y"})
                        continue
                    async with session.lock:
                        try:
                            session.driver.place_goal(g)
                        except ValueError as exc:
                            await send({"v": PROTOCOL_VERSION, "kind": "error", "message": str(exc)})
                            continue
                    await send({"v": PROTOCOL_VERSION, "kind": "ack", "session": session.id,
                                "queued": list(g)})
                elif kind == "clear_goals":
                    async with session.lock:
                        session.driver.clear_goals()
                    await send({"v": PROTOCOL_VERSION, "kind": "ack", "session": session.id,
                                "queue_len": 0})
                elif kind == "step":
                    frame = await session.do_step()
                    if frame.get("kind") != "state":
                        # state frames arrive through the broadcast subscription
                        await send(frame)
                elif kind == "reset":
                    async with session.lock:
                        session.driver = session._new_driver()
                    await send({"v": PROTOCOL_VERSION, "kind": "ack", "session": session.id,
                                "reset": True})
                else:
                    await send({"v": PROTOCOL_VERSION, "kind": "error",
                                "message": f"unknown kind {kind!r}"})
        except WebSocketDisconnect:
            pass
        finally:
            if forward_task is not None:
                forward_task.cancel()
            if session is not None and queue in session.subscribers:
                session.subscribers.remove(queue)

    return app
