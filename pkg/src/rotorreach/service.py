"""Real-time piloting session server.

Each session owns a fixed-rate simulation loop: simulated time advances only
via ticks (one tick = one plant step of dt seconds), so wall-clock jitter
never changes trajectory content.  Client inputs land in a latest-wins
mailbox and are zero-order held between messages; a tick never waits on the
network.  Sessions persist their recording in the trial CSV/sidecar format,
ready for training.

Two modes per session:

* ``realtime`` - the server ticks at 1/dt Hz wall pace (the browser console
  uses this).
* ``stepped``  - every client input message drives exactly one tick
  (lockstep; what scripted clients use for deterministic runs).
"""

from __future__ import annotations

import asyncio
import itertools
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from .gmr import BehaviorModel
from .plant import PlantModel, PlantParams, build_plant, saturate_input, step
from .prediction import Belief, PredictConfig, density_grid, predict
from .risk import DangerZone, collision_probability
from .scenario import (
    ActiveWorld,
    World,
    activate_world,
    default_world,
    outcome_of,
    step_world,
    world_to_json,
)
from .trajectories import Trajectory, next_trial_path, save_trajectory
from .gaussmix import GaussianComponent, Mixture

__all__ = ["ServiceConfig", "Session", "create_app"]


@dataclass
class ServiceConfig:
    trials_dir: Path
    world: World = field(default_factory=default_world)
    plant_params: PlantParams = field(default_factory=PlantParams)
    overlay_model: BehaviorModel | None = None
    overlay_horizon: float = 2.0
    overlay_max_components: int = 8
    overlay_every_ticks: int = 25
    overlay_grid: tuple[int, int] = (48, 64)  # (nx, ny)


class Session:
    """One pilot, one vehicle, one recording; safe to tick from a single loop."""

    def __init__(self, session_id: str, config: ServiceConfig, seed: int, mode: str):
        self.id = session_id
        self.config = config
        self.mode = mode
        self.pm: PlantModel = build_plant(config.plant_params)
        self.world: ActiveWorld = activate_world(config.world, seed, self.pm.dt)
        self.state = np.zeros(6)
        self.state[0], self.state[1] = config.world.start_position
        self.tick_count = 0
        self.phase = "preSpawn"
        self.events_seen: set[str] = set()
        self.latched = np.zeros(2)
        self.last_seq = -1
        self._times: list[float] = []
        self._states: list[np.ndarray] = []
        self._inputs: list[np.ndarray] = []
        self.trial_path: Path | None = None
        self.pending_overlay: dict | None = None
        self._lock = threading.Lock()

    # -- input ---------------------------------------------------------------

    def submit_input(self, alpha: float, thrust: float, seq: int) -> None:
        """Latest-wins mailbox keyed by client sequence number."""
        if seq <= self.last_seq:
            return
        self.last_seq = seq
        self.latched = np.array([float(alpha), float(thrust)])

    # -- simulation ----------------------------------------------------------

    def tick(self) -> dict:
        """Advance one step under the latched input; returns the frame payload."""
        if self.phase == "ended":
            return self._frame(terminal=True)

        u = saturate_input(self.latched, self.pm.params)
        t_now = self.tick_count * self.pm.dt
        self._times.append(t_now)
        self._states.append(self.state.copy())
        self._inputs.append(u.copy())

        self.state = step(self.pm, self.state, u, saturate=False)
        self.tick_count += 1
        t_new = self.tick_count * self.pm.dt
        events, self.world = step_world(self.world, self.state, t_new)
        self.events_seen.update(events)
        if "obstacleSpawned" in events:
            self.phase = "postSpawn"

        terminal = bool({"landed", "collided", "leftBounds"} & set(events))
        if terminal:
            self.phase = "ended"
            self._persist()

        overlay = None
        if (
            not terminal
            and self.config.overlay_model is not None
            and self.phase == "postSpawn"
            and self.tick_count % self.config.overlay_every_ticks == 0
        ):
            if self.mode == "stepped":
                overlay = self.compute_overlay()
            # realtime overlays are computed off the tick loop; see channel handler
        if overlay is None:
            overlay = self.pending_overlay
        self.pending_overlay = None

        return self._frame(events=events, overlay=overlay, terminal=terminal)

    def wants_overlay(self) -> bool:
        return (
            self.config.overlay_model is not None
            and self.phase == "postSpawn"
            and self.tick_count % self.config.overlay_every_ticks == 0
        )

    def compute_overlay(self) -> dict:
        """Short-horizon prediction from the current state as a point belief."""
        cfg = self.config
        elapsed = self.tick_count * self.pm.dt - self.world.spawn_time
        point = Belief(
            mixture=Mixture(
                (GaussianComponent(1.0, self.state.copy(), np.zeros((6, 6))),)
            ),
            time=max(elapsed, 0.0),
            step_index=0,
        )
        steps = int(round(cfg.overlay_horizon / self.pm.dt))
        traj = predict(
            point,
            self.pm,
            cfg.overlay_model,
            PredictConfig(horizon_steps=steps, max_components=cfg.overlay_max_components),
        )
        final = traj.final
        bounds = cfg.world.bounds
        nx, ny = cfg.overlay_grid
        grid = density_grid(
            final, (bounds.x_min, bounds.x_max), (bounds.y_min, bounds.y_max), nx, ny
        )
        dz = cfg.world.danger_zone
        zone = DangerZone(dz.x_min, dz.x_max, dz.y_min, dz.y_max)
        return {
            "horizon": cfg.overlay_horizon,
            "computedAtTick": self.tick_count,
            "grid": {
                "x0": bounds.x_min,
                "x1": bounds.x_max,
                "y0": bounds.y_min,
                "y1": bounds.y_max,
                "nx": nx,
                "ny": ny,
                "values": [float(v) for v in grid.values.ravel()],
            },
            "risk": collision_probability(final, zone),
        }

    def _frame(self, events=(), overlay=None, terminal=False) -> dict:
        return {
            "type": "frame",
            "t": self.tick_count * self.pm.dt,
            "step": self.tick_count,
            "state": [float(v) for v in self.state],
            "events": list(events),
            "obstacle": self.world.obstacle.as_list() if self.world.spawned else None,
            "overlay": overlay,
            "terminal": terminal,
        }

    def initial_frame(self) -> dict:
        return self._frame()

    # -- persistence -----------------------------------------------------------

    def end(self) -> Path:
        """Terminate (if still flying) and persist; idempotent."""
        if self.phase != "ended":
            self.phase = "ended"
            self._persist()
        assert self.trial_path is not None
        return self.trial_path

    def _persist(self) -> None:
        if self.trial_path is not None:
            return
        t_final = self.tick_count * self.pm.dt
        times = self._times + [t_final]
        states = self._states + [self.state.copy()]
        inputs = self._inputs + [saturate_input(self.latched, self.pm.params)]
        spawned = self.world.spawned
        traj = Trajectory(
            t=np.array(times),
            states=np.array(states),
            inputs=np.array(inputs),
            spawn_time=self.world.spawn_time if spawned else times[-1],
            outcome=outcome_of(self.events_seen, timed_out=False),
            dt=self.pm.dt,
        )
        with self._lock:
            path = next_trial_path(self.config.trials_dir)
            save_trajectory(traj, path)
        self.trial_path = path


# ---------------------------------------------------------------------------
# application
# ---------------------------------------------------------------------------

def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="rotorreach pilot service")
    sessions: dict[str, Session] = {}
    counter = itertools.count(1)
    store_lock = threading.Lock()

    @app.get("/health")
    def health():
        return {"status": "ok", "sessions": len(sessions)}

    @app.post("/sessions")
    def create_session(body: dict | None = None):
        body = body or {}
        seed = int(body.get("seed", 0))
        mode = body.get("mode", "realtime")
        if mode not in ("realtime", "stepped"):
            raise HTTPException(status_code=422, detail=f"unknown mode {mode!r}")
        with store_lock:
            session_id = f"s{next(counter):04d}"
            session = Session(session_id, config, seed, mode)
            sessions[session_id] = session
        return {
            "id": session_id,
            "channel": f"/sessions/{session_id}/channel",
            "mode": mode,
            "dt": session.pm.dt,
            "world": world_to_json(config.world),
        }

    @app.delete("/sessions/{session_id}")
    def end_session(session_id: str):
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="no such session")
        path = session.end()
        return {"id": session_id, "trial": str(path), "outcome_events": sorted(session.events_seen)}

    @app.get("/sessions/{session_id}/trial")
    def download_trial(session_id: str):
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="no such session")
        if session.trial_path is None:
            raise HTTPException(status_code=409, detail="session still active; end it first")
        csv_path = session.trial_path
        sidecar = json.loads(csv_path.with_suffix(".json").read_text())
        return {
            "filename": csv_path.name,
            "csv": csv_path.read_text(),
            "sidecar": sidecar,
        }

    @app.websocket("/sessions/{session_id}/channel")
    async def channel(ws: WebSocket, session_id: str):
        session = sessions.get(session_id)
        if session is None:
            await ws.close(code=4404)
            return
        await ws.accept()
        await ws.send_text(json.dumps(session.initial_frame()))
        if session.mode == "stepped":
            await _stepped_loop(ws, session)
        else:
            await _realtime_loop(ws, session)

    async def _stepped_loop(ws: WebSocket, session: Session) -> None:
        try:
            while True:
                msg = json.loads(await ws.receive_text())
                if msg.get("type") != "input":
                    continue
                session.submit_input(
                    msg.get("alpha", 0.0), msg.get("thrust", 0.0), int(msg.get("seq", 0))
                )
                frame = session.tick()
                await ws.send_text(json.dumps(frame))
                if frame["terminal"]:
                    break
        except WebSocketDisconnect:
            pass

    async def _realtime_loop(ws: WebSocket, session: Session) -> None:
        stop = asyncio.Event()

        async def reader():
            try:
                while not stop.is_set():
                    msg = json.loads(await ws.receive_text())
                    if msg.get("type") == "input":
                        session.submit_input(
                            msg.get("alpha", 0.0),
                            msg.get("thrust", 0.0),
                            int(msg.get("seq", 0)),
                        )
            except WebSocketDisconnect:
                stop.set()

        async def ticker():
            overlay_task: asyncio.Task | None = None
            try:
                while not stop.is_set():
                    started = asyncio.get_event_loop().time()
                    if session.wants_overlay() and (overlay_task is None or overlay_task.done()):
                        overlay_task = asyncio.create_task(
                            asyncio.to_thread(session.compute_overlay)
                        )
                    if overlay_task is not None and overlay_task.done():
                        session.pending_overlay = overlay_task.result()
                        overlay_task = None
                    frame = session.tick()
                    await ws.send_text(json.dumps(frame))
                    if frame["terminal"]:
                        stop.set()
                        break
                    elapsed = asyncio.get_event_loop().time() - started
                    await asyncio.sleep(max(session.pm.dt - elapsed, 0.0))
            except (WebSocketDisconnect, RuntimeError):
                stop.set()

        reader_task = asyncio.create_task(reader())
        await ticker()
        stop.set()
        reader_task.cancel()

    return app
