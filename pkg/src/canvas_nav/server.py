"""Annotation + teleoperation service: map listing, sketch submission with
condition validation, and the websocket teleop loop that records human
demonstrations.

The simulation is server-authoritative. Live sessions tick on the server
clock at 10 Hz with zero-order hold and a 0.5 s command watchdog; replay
sessions (mode=replay) step purely from client command timestamps, so a
replayed command log reproduces its demo exactly.
"""

from __future__ import annotations

import base64
import logging
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .dataset import (
    MISLEADING,
    PRECISE,
    Datapoint,
    TeleopSession,
    annotate_fd,
    atomic_write,
    iter_datapoints,
    load_dataset_map,
    save_datapoint,
    stable_json,
    validate_condition,
)
from .errors import CanvasNavError, ConditionMismatch
from .geometry import Point2, Polyline, Pose2, polyline_length
from .render import canvas_transform, encode_png, render_canvas, render_front_view
from .sim import SimConfig

log = logging.getLogger(__name__)


class DatasetStore:
    """Maps + datapoints under one dataset root; write-temp-then-rename on
    every persist so a crashing session cannot corrupt the directory."""

    def __init__(self, root: Path, cfg: SimConfig = SimConfig()):
        self.root = Path(root)
        self.cfg = cfg
        self._maps = {}

    def environments(self):
        return sorted(d.name for d in self.root.iterdir()
                      if d.is_dir() and (d / "map.pgm").exists())

    def env_dir(self, env: str) -> Path:
        return self.root / env

    def map_for(self, env: str):
        if env not in self._maps:
            self._maps[env] = load_dataset_map(self.env_dir(env))
        return self._maps[env]

    def datapoint(self, dp_id: str) -> Optional[Datapoint]:
        env = dp_id.split("_")[0]
        path = self.env_dir(env) / "datapoints" / f"dp_{dp_id}.json"
        if not path.exists():
            return None
        from .dataset import load_datapoint
        return load_datapoint(path)

    def next_index(self, env: str) -> int:
        indices = [0]
        for dp in iter_datapoints(self.env_dir(env)):
            tail = dp.id.rsplit("_", 1)[-1]
            if tail.isdigit():
                indices.append(int(tail))
        return max(indices) + 1

    def save(self, dp: Datapoint) -> Path:
        grid, _ = self.map_for(dp.environment)
        path = self.env_dir(dp.environment) / "datapoints" / f"dp_{dp.id}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        save_datapoint(dp, path, grid)
        return path

    def save_teleop_record(self, dp_id: str, record, suffix: str = "") -> Path:
        env = dp_id.split("_")[0]
        out_dir = self.env_dir(env) / "episodes"
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = {
            "datapoint_id": dp_id,
            "duration": record.duration,
            "incomplete": record.incomplete,
            "degenerate": record.degenerate,
            "samples": [[t, p.x, p.y, p.heading, v, w] for t, p, v, w in record.samples],
        }
        path = out_dir / f"teleop_{dp_id}{suffix}.json"
        atomic_write(path, stable_json(payload))
        return path


def _b64png(image) -> str:
    return base64.b64encode(encode_png(image)).decode()


def create_app(dataset_root: Path, cfg: SimConfig = SimConfig(),
               ui_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="canvas-nav teleop service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    store = DatasetStore(dataset_root, cfg)
    app.state.store = store

    @app.get("/maps")
    def list_maps():
        out = []
        for env in store.environments():
            grid, regions = store.map_for(env)
            w_m, h_m = grid.extent_m
            out.append({"env": env, "width_m": w_m, "height_m": h_m,
                        "resolution": grid.resolution,
                        "origin": [grid.origin.x, grid.origin.y],
                        "region_count": len(regions)})
        return {"environments": out}

    @app.get("/maps/{env}")
    def get_map(env: str):
        if env not in store.environments():
            return JSONResponse(status_code=404, content={"detail": f"unknown env {env!r}"})
        grid, regions = store.map_for(env)
        tf = canvas_transform(grid)
        base = render_canvas(grid)
        return {
            "env": env,
            "resolution": grid.resolution,
            "origin": [grid.origin.x, grid.origin.y],
            "width_cells": grid.width,
            "height_cells": grid.height,
            "regions": [{"id": r.id, "kind": r.kind, "polygon": r.polygon.tolist(),
                         **({"direction_rad": r.direction_rad} if r.direction_rad is not None else {})}
                        for r in regions],
            "transform": tf.to_dict(),
            "base_png_b64": _b64png(base),
        }

    @app.get("/datapoints/{dp_id}")
    def get_datapoint(dp_id: str):
        dp = store.datapoint(dp_id)
        if dp is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown datapoint {dp_id!r}"})
        return dp.to_dict()

    @app.post("/datapoints", status_code=201)
    def post_datapoint(body: dict):
        env = body.get("env")
        if env not in store.environments():
            return JSONResponse(status_code=404, content={"detail": f"unknown env {env!r}"})
        condition = body.get("condition")
        if condition not in (PRECISE, MISLEADING):
            return JSONResponse(status_code=422, content={"detail": {
                "error": "BadCondition", "message": "condition must be precise|misleading"}})
        stroke = body.get("sketch") or []
        if len(stroke) < 2:
            return JSONResponse(status_code=422, content={"detail": {
                "error": "BadSketch", "message": "sketch needs >= 2 points"}})
        grid, _ = store.map_for(env)
        unit = body.get("unit", "world")
        if unit == "pixel":
            tf = canvas_transform(grid)
            stroke = [tf.px_to_world(px, py, grid.origin) for px, py in stroke]
        elif unit != "world":
            return JSONResponse(status_code=422, content={"detail": {
                "error": "BadUnit", "message": "unit must be world|pixel"}})
        try:
            sketch = Polyline(stroke)
        except CanvasNavError as e:
            return JSONResponse(status_code=422, content={"detail": {
                "error": "BadSketch", "message": str(e)}})
        start_raw = body.get("start")
        if start_raw:
            start_pose = Pose2(*start_raw)
        else:
            p0, p1 = sketch.pts[0], sketch.pts[1]
            heading = float(np.arctan2(p1[1] - p0[1], p1[0] - p0[0]))
            start_pose = Pose2(float(p0[0]), float(p0[1]), heading)
        goal_raw = body.get("goal")
        goal = Point2(*goal_raw) if goal_raw else Point2(*sketch.pts[-1])
        tag = "p" if condition == PRECISE else "m"
        dp = Datapoint(
            id=f"{env}_{tag}_{store.next_index(env):04d}",
            environment=env,
            map_ref="map.pgm",
            sketch=sketch,
            language=body.get("language", ""),
            condition=condition,
            goal=goal,
            start_pose=start_pose,
            constraints=[r.id for r in store.map_for(env)[1]],
        )
        try:
            validate_condition(dp, grid)
        except ConditionMismatch as e:
            return JSONResponse(status_code=422, content={"detail": {
                "error": "ConditionMismatch",
                "segment_index": e.segment_index,
                "message": str(e)}})
        store.save(dp)
        return {"datapoint": dp.to_dict()}

    @app.websocket("/teleop/{dp_id}")
    async def teleop(ws: WebSocket, dp_id: str):
        mode = ws.query_params.get("mode", "live")
        send_images = ws.query_params.get("render", "1") != "0"
        await ws.accept()
        dp = store.datapoint(dp_id)
        if dp is None:
            await ws.close(code=4404, reason=f"unknown datapoint {dp_id!r}")
            return
        grid, _ = store.map_for(dp.environment)
        session = TeleopSession(grid, dp.start_pose, cfg)

        def frame(status="running"):
            pose = session.state.pose
            payload = {
                "tick": len(session.record.samples) - 1,
                "t": session.time,
                "pose": [pose.x, pose.y, pose.heading],
                "v": session.state.linear_velocity,
                "omega": session.state.angular_velocity,
                "collisions": len(session.tracker.events),
                "status": status,
            }
            if send_images:
                hindsight = Polyline(np.array([[s[1].x, s[1].y] for s in session.record.samples]))
                payload["canvas_png_b64"] = _b64png(render_canvas(grid, dp.sketch, hindsight, pose))
                payload["front_view_png_b64"] = _b64png(render_front_view(grid, pose))
            return payload

        async def finalize():
            record = session.finalize()
            store.save_teleop_record(dp_id, record)
            out_dp = replace(dp, demo=record.pose_track(), demo_duration=record.duration)
            fd = None
            if not record.degenerate:
                out_dp = annotate_fd(out_dp)
                fd = out_dp.fd_sketch_demo
            store.save(out_dp)
            await ws.send_json({"done": True, "fd_sketch_demo": fd,
                                "demo_length_m": polyline_length(record.pose_track()),
                                "duration_s": record.duration,
                                "degenerate": record.degenerate,
                                "collisions": len(session.tracker.events)})

        def parse_command(msg: dict):
            v = float(msg.get("v", 0.0))
            w = float(msg.get("ω", msg.get("omega", 0.0)))
            return v, w

        try:
            if mode == "replay":
                while True:
                    msg = await ws.receive_json()
                    if msg.get("end"):
                        session.step_to(session._last_cmd_stamp + TeleopSession.WATCHDOG_S)
                        await finalize()
                        break
                    if "t" not in msg:
                        raise ValueError("replay frames need a 't' stamp")
                    t = float(msg["t"])
                    session.step_to(t)
                    v, w = parse_command(msg)
                    session.command(v, w, t)
                    await ws.send_json(frame())
            else:
                import asyncio
                end_event = asyncio.Event()

                async def receiver():
                    while not end_event.is_set():
                        msg = await ws.receive_json()
                        if msg.get("end"):
                            end_event.set()
                            return
                        v, w = parse_command(msg)
                        session.command(v, w, t=session.time)

                recv_task = asyncio.create_task(receiver())
                try:
                    while not end_event.is_set():
                        await asyncio.sleep(1.0 / TeleopSession.RATE_HZ)
                        if recv_task.done():
                            exc = recv_task.exception()
                            if exc is not None:
                                raise exc
                            break
                        session.tick()
                        await ws.send_json(frame())
                finally:
                    if not recv_task.done():
                        recv_task.cancel()
                if end_event.is_set():
                    await finalize()
            await ws.close()
        except WebSocketDisconnect:
            record = session.finalize(aborted=True)
            store.save_teleop_record(dp_id, record, suffix="_partial")
        except (ValueError, KeyError, TypeError) as e:
            record = session.finalize(aborted=True)
            store.save_teleop_record(dp_id, record, suffix="_partial")
            try:
                await ws.close(code=1002, reason=f"protocol violation: {e}")
            except RuntimeError:
                pass

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
