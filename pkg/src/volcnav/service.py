"""Long-running mission service: sessions, planning, telemetry, persistence.

HTTP endpoints manage sessions and accept operator commands; a WebSocket
channel streams ordered telemetry bundles (one per mission tick, sequence
numbered, resumable from a bounded replay buffer). Handlers never touch
mission state directly: commands go through the runner's serialized queue
and reads see immutable snapshots. Telemetry is a projection of the mission
log, so any streamed state is reconstructible from the persisted ndjson.

Environment: VOLCNAV_BIND (host:port), VOLCNAV_DATA_DIR (session storage),
VOLCNAV_CLOCK (realtime | max-speed). Stamps are simulation time.
"""

from __future__ import annotations

import asyncio
import json
import os
import threading
import time
import uuid
from collections import deque
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Response, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse

from . import raster
from .mission import MissionConfig, MissionLog, MissionRunner, compute_metrics
from .roadgraph import GraphParseError, MissionPlan, PlanningError, load_graph, plan
from .world import ParamError, world_from_document

API_VERSION = 1
TELEMETRY_BUFFER = 4096


def _apply_overrides(config, overrides: dict):
    """Apply dotted-path overrides onto nested dataclass config fields."""
    for path, value in (overrides or {}).items():
        parts = path.split(".")
        target = config
        for part in parts[:-1]:
            if not hasattr(target, part):
                raise ValueError(f"unknown config section {part!r} in {path!r}")
            target = getattr(target, part)
        leaf = parts[-1]
        valid = {f.name for f in dataclass_fields(type(target))}
        if leaf not in valid:
            raise ValueError(f"unknown config field {path!r}")
        setattr(target, leaf, type(getattr(target, leaf))(value) if getattr(target, leaf) is not None else value)
    return config


class Session:
    def __init__(self, sid: str, data_dir: Path, clock: str):
        self.id = sid
        self.dir = data_dir / "sessions" / sid
        self.dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock
        self.lock = threading.Lock()
        self.world = None
        self.graph = None
        self.mission = None
        self.global_path = None
        self.runner: MissionRunner | None = None
        self.thread: threading.Thread | None = None
        self.seq = 0
        self.buffer: deque = deque(maxlen=TELEMETRY_BUFFER)
        self._phase = "idle"

    # -- state machine --------------------------------------------------------

    @property
    def state(self) -> str:
        if self.runner is not None and self.runner.state != "idle":
            return self.runner.state
        return self._phase

    def summary(self) -> dict:
        return {
            "session_id": self.id,
            "state": self.state,
            "has_world": self.world is not None,
            "has_graph": self.graph is not None,
            "has_plan": self.global_path is not None,
            "seq": self.seq,
            "clock": self.clock,
        }

    # -- telemetry --------------------------------------------------------------

    def publish(self, events: list[dict]):
        with self.lock:
            self.seq += 1
            msg = {"seq": self.seq, "type": "tick", "t": events[-1]["t"] if events else None,
                   "events": events}
            self.buffer.append(msg)

    def buffered_since(self, since: int) -> tuple[list[dict], bool]:
        """(messages after `since`, gap_flag)."""
        with self.lock:
            msgs = [m for m in self.buffer if m["seq"] > since]
            oldest = self.buffer[0]["seq"] if self.buffer else self.seq + 1
            gap = since + 1 < oldest and since < self.seq
        return msgs, gap

    def snapshot(self) -> dict:
        with self.lock:
            snap = {
                "type": "snapshot",
                "seq": self.seq,
                "state": self.state,
                "session": self.summary(),
            }
            if self.graph is not None:
                snap["graph"] = {
                    "nodes": {str(nid): np.round(enu[:2], 3).tolist() for nid, enu in self.graph.enu.items()},
                    "edges": [[str(a), str(b)] for a, b in self.graph.edges],
                }
            if self.global_path is not None:
                snap["path"] = {
                    "enu": np.round(self.global_path.enu, 4).tolist(),
                    "length": self.global_path.length,
                    "target_indices": self.global_path.target_indices,
                }
            if self.runner is not None:
                log = self.runner.log
                est = [e for e in log.events if e["type"] == "pose-estimate"]
                true = [e for e in log.events if e["type"] == "true-pose"]
                gas = [e for e in log.events if e["type"] == "gas"]
                snap["trajectory"] = [e["position"] for e in est[::5]]
                snap["true_trajectory"] = [e["position"] for e in true[::5]]
                snap["gas_markers"] = [
                    {"t": e["t"], "amu": e["amu"], "value": e["value"], "position": e["position"]}
                    for e in gas[:: max(1, len(gas) // 500)]
                ] if gas else []
                closed, open_since = log.intervention_intervals()
                snap["interventions"] = [list(iv) for iv in closed]
                snap["open_intervention_since"] = open_since
                snap["clock"] = log.events[-1]["t"] if log.events else 0.0
                snap["metrics"] = self.live_metrics()
                snap["rasters"] = self.raster_refs()
            return snap

    def raster_refs(self) -> dict:
        base = f"/sessions/{self.id}/rasters"
        names = ["terrain"]
        if self.runner is not None:
            names += ["height", "traversability"]
            if self.runner.fields is not None:
                names += ["sdf", "gdf"]
        return {n: f"{base}/{n}" for n in names}

    def live_metrics(self) -> dict:
        runner = self.runner
        if runner is None:
            return {}
        log = runner.log
        if log.terminal_event() is not None:
            return compute_metrics(log).to_document()
        tmp = MissionLog(dict(log.meta))
        tmp.events = list(log.events)
        now = tmp.events[-1]["t"] if tmp.events else 0.0
        open_iv = tmp._open_intervention()
        if open_iv is not None:
            tmp.events.append({"t": now, "type": "intervention-end", "operator": "live"})
        tmp.events.append({"t": now, "type": "mission-complete"})
        doc = compute_metrics(tmp).to_document()
        doc["terminal"] = "live"
        return doc

    # -- mission execution ------------------------------------------------------

    def start_runner(self, config: MissionConfig, seed: int):
        runner = MissionRunner(self.world, self.graph, self.mission, config, seed,
                               global_path=self.global_path)
        self.runner = runner
        before = [0]

        def loop():
            runner.start()
            dt = runner.dt
            while True:
                t0 = time.monotonic()
                alive = runner.tick()
                events = runner.log.events[before[0]:]
                before[0] = len(runner.log.events)
                if events:
                    self.publish(events)
                if not alive:
                    break
                if self.clock == "realtime":
                    lag = dt - (time.monotonic() - t0)
                    if lag > 0:
                        time.sleep(lag)
            self.persist()

        self.thread = threading.Thread(target=loop, daemon=True, name=f"mission-{self.id}")
        self.thread.start()

    def persist(self):
        if self.runner is None:
            return
        (self.dir / "mission.ndjson").write_text(self.runner.log.to_ndjson())
        if self.runner.log.terminal_event() is not None:
            metrics = compute_metrics(self.runner.log).to_document()
            (self.dir / "metrics.json").write_text(json.dumps(metrics, sort_keys=True))


def create_app(data_dir=None, clock=None, console_dir=None) -> FastAPI:
    data_dir = Path(data_dir or os.environ.get("VOLCNAV_DATA_DIR", "./volcnav-data"))
    default_clock = clock or os.environ.get("VOLCNAV_CLOCK", "realtime")
    app = FastAPI(title="volcnav mission service", version=str(API_VERSION))
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])
    sessions: dict[str, Session] = {}

    def conflict(session, detail):
        return JSONResponse(status_code=409, content={"error": "conflict", "state": session.state,
                                                      "detail": detail})

    def invalid(detail, field=None):
        content = {"error": "validation", "detail": str(detail)}
        if field:
            content["field"] = field
        return JSONResponse(status_code=422, content=content)

    def get_session(sid) -> Session | None:
        if sid in sessions:
            return sessions[sid]
        stored = data_dir / "sessions" / sid
        if stored.exists():
            s = Session(sid, data_dir, default_clock)
            sessions[sid] = s
            return s
        return None

    @app.post("/sessions")
    def create_session(body: dict | None = None):
        body = body or {}
        sid = body.get("session_id") or uuid.uuid4().hex[:12]
        if sid in sessions:
            return invalid(f"session {sid} exists", "session_id")
        sessions[sid] = Session(sid, data_dir, body.get("clock", default_clock))
        return sessions[sid].summary()

    @app.get("/sessions")
    def list_sessions():
        return [s.summary() for s in sessions.values()]

    @app.get("/sessions/{sid}")
    def session_info(sid: str):
        s = get_session(sid)
        if s is None:
            return JSONResponse(status_code=404, content={"error": "no such session"})
        return s.summary()

    @app.post("/sessions/{sid}/world")
    def upload_world(sid: str, body: dict):
        s = get_session(sid)
        if s is None:
            return JSONResponse(status_code=404, content={"error": "no such session"})
        if s.state not in ("idle", "finished", "faulted"):
            return conflict(s, "world upload only before start")
        try:
            s.world = world_from_document(body)
        except (ParamError, KeyError, TypeError) as err:
            return invalid(err, "world")
        (s.dir / "world.json").write_text(json.dumps(body, sort_keys=True))
        return s.summary()

    @app.post("/sessions/{sid}/graph")
    def upload_graph(sid: str, body: dict):
        s = get_session(sid)
        if s is None:
            return JSONResponse(status_code=404, content={"error": "no such session"})
        if s.state not in ("idle", "finished", "faulted"):
            return conflict(s, "graph upload only before start")
        try:
            s.graph = load_graph(body)
        except GraphParseError as err:
            return invalid(err, "graph")
        (s.dir / "graph.json").write_text(json.dumps(body, sort_keys=True))
        return s.summary()

    @app.post("/sessions/{sid}/mission")
    def plan_mission(sid: str, body: dict):
        s = get_session(sid)
        if s is None:
            return JSONResponse(status_code=404, content={"error": "no such session"})
        if s.state in ("running", "intervention", "paused", "planning"):
            return conflict(s, "mission already in progress")
        if s.graph is None:
            return invalid("upload a road graph first", "graph")
        s._phase = "planning"
        try:
            mission = MissionPlan.from_document(body)
            spacing = float(body.get("spacing", 0.5))
            s.global_path = plan(s.graph, mission, spacing)
            s.mission = mission
        except (GraphParseError, PlanningError, KeyError, TypeError, ValueError) as err:
            s._phase = "idle"
            return invalid(err, "mission")
        s._phase = "idle"
        (s.dir / "mission.json").write_text(json.dumps(body, sort_keys=True))
        return {
            "session_id": sid,
            "length": s.global_path.length,
            "vertices": len(s.global_path.enu),
            "path": np.round(s.global_path.enu, 4).tolist(),
            "target_indices": s.global_path.target_indices,
        }

    @app.post("/sessions/{sid}/start")
    def start(sid: str, body: dict | None = None):
        s = get_session(sid)
        if s is None:
            return JSONResponse(status_code=404, content={"error": "no such session"})
        if s.state in ("running", "intervention", "paused"):
            return {**s.summary(), "notice": "already running"}
        if s.world is None or s.graph is None or s.global_path is None:
            return conflict(s, "need world, graph, and planned mission before start")
        body = body or {}
        config = MissionConfig()
        try:
            _apply_overrides(config, body.get("config", {}))
        except (ValueError, TypeError) as err:
            return invalid(err, "config")
        seed = int(body.get("seed", 0))
        s.start_runner(config, seed)
        return {**s.summary(), "seed": seed}

    def _relay(sid: str, command: dict, legal_states: tuple, detail: str):
        s = get_session(sid)
        if s is None:
            return JSONResponse(status_code=404, content={"error": "no such session"})
        if s.state not in legal_states or s.runner is None:
            return conflict(s, detail)
        s.runner.submit(command)
        return s.summary()

    @app.post("/sessions/{sid}/pause")
    def pause(sid: str):
        return _relay(sid, {"type": "pause"}, ("running", "intervention"), "pause needs an active run")

    @app.post("/sessions/{sid}/resume")
    def resume(sid: str):
        return _relay(sid, {"type": "resume"}, ("paused",), "resume needs a paused run")

    @app.post("/sessions/{sid}/intervene/start")
    def intervene_start(sid: str, body: dict | None = None):
        op = (body or {}).get("operator", "operator")
        return _relay(sid, {"type": "intervene-start", "operator": op}, ("running",),
                      "interventions start from the running state")

    @app.post("/sessions/{sid}/intervene/stop")
    def intervene_stop(sid: str, body: dict | None = None):
        op = (body or {}).get("operator", "operator")
        return _relay(sid, {"type": "intervene-stop", "operator": op}, ("intervention",),
                      "no intervention open")

    @app.post("/sessions/{sid}/teleop")
    def teleop(sid: str, body: dict):
        return _relay(
            sid,
            {"type": "teleop", "vx": float(body.get("vx", 0.0)), "vy": float(body.get("vy", 0.0)),
             "omega": float(body.get("omega", 0.0))},
            ("intervention",),
            "teleop twists are accepted only during an intervention",
        )

    @app.post("/sessions/{sid}/stop")
    def stop(sid: str):
        return _relay(sid, {"type": "stop"}, ("running", "intervention", "paused"), "no active run")

    @app.get("/sessions/{sid}/metrics")
    def metrics(sid: str):
        s = get_session(sid)
        if s is None:
            return JSONResponse(status_code=404, content={"error": "no such session"})
        if s.runner is not None:
            return s.live_metrics()
        stored = s.dir / "mission.ndjson"
        if stored.exists():
            log = MissionLog.from_ndjson(stored.read_text())
            return compute_metrics(log).to_document()
        return conflict(s, "no mission has run")

    @app.get("/sessions/{sid}/log")
    def download_log(sid: str):
        s = get_session(sid)
        if s is None:
            return JSONResponse(status_code=404, content={"error": "no such session"})
        if s.runner is not None:
            return PlainTextResponse(s.runner.log.to_ndjson(), media_type="application/x-ndjson")
        stored = s.dir / "mission.ndjson"
        if stored.exists():
            return PlainTextResponse(stored.read_text(), media_type="application/x-ndjson")
        return conflict(s, "no mission log")

    @app.get("/sessions/{sid}/rasters/{name}")
    def rasters(sid: str, name: str):
        s = get_session(sid)
        if s is None:
            return JSONResponse(status_code=404, content={"error": "no such session"})
        grid = res = origin = None
        if name == "terrain" and s.world is not None:
            hf = s.world.height
            grid, res, origin = hf.heights, hf.resolution, hf.origin
        elif s.runner is not None:
            emap = s.runner.emap
            map_origin = (
                emap.center[0] - (emap.cells - 1) / 2 * emap.resolution,
                emap.center[1] - (emap.cells - 1) / 2 * emap.resolution,
            )
            if name == "height":
                grid, res, origin = emap.height, emap.resolution, map_origin
            elif name == "traversability":
                grid, res, origin = emap.traversability, emap.resolution, map_origin
            elif name in ("sdf", "gdf") and s.runner.fields is not None:
                f = s.runner.fields
                grid, res, origin = getattr(f, name), f.resolution, f.origin
        if grid is None:
            return JSONResponse(status_code=404, content={"error": f"raster {name!r} unavailable"})
        with s.lock:
            blob = raster.encode_raster(np.nan_to_num(np.asarray(grid, dtype=np.float32), nan=-1.0),
                                        res, origin)
        return Response(content=blob, media_type="application/octet-stream")

    @app.websocket("/sessions/{sid}/telemetry")
    async def telemetry(ws: WebSocket):
        sid = ws.path_params["sid"]
        s = get_session(sid)
        if s is None:
            await ws.close(code=4004)
            return
        await ws.accept()
        since = ws.query_params.get("since")
        try:
            if since is None:
                await ws.send_json(s.snapshot())
                cursor = s.seq
            else:
                cursor = int(since)
                msgs, gap = s.buffered_since(cursor)
                if gap:
                    await ws.send_json({"type": "gap", "seq": s.seq})
                    await ws.send_json(s.snapshot())
                    cursor = s.seq
                else:
                    for m in msgs:
                        await ws.send_json(m)
                        cursor = m["seq"]
            while True:
                msgs, _ = s.buffered_since(cursor)
                for m in msgs:
                    await ws.send_json(m)
                    cursor = m["seq"]
                if not msgs:
                    await asyncio.sleep(0.02)
        except (WebSocketDisconnect, RuntimeError):
            return

    console = Path(console_dir) if console_dir else Path(__file__).resolve().parents[2] / "frontend"
    if (console / "index.html").exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=console, html=True), name="console")

    app.state.sessions = sessions
    app.state.data_dir = data_dir
    return app


def main():
    import uvicorn

    bind = os.environ.get("VOLCNAV_BIND", "127.0.0.1:8750")
    host, _, port = bind.partition(":")
    uvicorn.run(create_app(), host=host or "127.0.0.1", port=int(port or 8750))


if __name__ == "__main__":
    main()
