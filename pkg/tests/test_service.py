import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from rotorreach.plant import PlantParams, build_plant, step
from rotorreach.scenario import activate_world, default_pilot_model, default_world
from rotorreach.service import ServiceConfig, create_app
from rotorreach.trajectories import extract_window, load_trajectory

from tests.scripted_client import FlightScript, find_descent_start, fly_stepped_session


@pytest.fixture()
def client(tmp_path):
    config = ServiceConfig(trials_dir=tmp_path / "trials")
    app = create_app(config)
    with TestClient(app) as c:
        c.trials_dir = tmp_path / "trials"
        yield c


@pytest.fixture()
def overlay_client(tmp_path):
    config = ServiceConfig(
        trials_dir=tmp_path / "trials",
        overlay_model=default_pilot_model(),
        overlay_every_ticks=25,
        overlay_grid=(16, 20),
    )
    app = create_app(config)
    with TestClient(app) as c:
        c.trials_dir = tmp_path / "trials"
        yield c


def create_stepped(client, seed=0):
    resp = client.post("/sessions", json={"seed": seed, "mode": "stepped"})
    assert resp.status_code == 200
    return resp.json()


def drive(client, created, inputs):
    """Send each (alpha, thrust) once; collect the resulting frames."""
    frames = []
    with client.websocket_connect(created["channel"]) as ws:
        frames.append(json.loads(ws.receive_text()))
        for seq, (alpha, thrust) in enumerate(inputs):
            ws.send_text(json.dumps(
                {"type": "input", "alpha": alpha, "thrust": thrust, "seq": seq}
            ))
            frames.append(json.loads(ws.receive_text()))
            if frames[-1]["terminal"]:
                break
    return frames


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


def test_create_returns_channel_and_world(client):
    created = create_stepped(client)
    assert created["channel"].endswith("/channel")
    assert created["dt"] == 0.04
    assert "laneBoundaries" in created["world"]


def test_zero_input_matches_pure_dynamics(client):
    created = create_stepped(client)
    frames = drive(client, created, [(0.0, 0.0)] * 10)
    pm = build_plant()
    x = np.zeros(6)
    x[0], x[1] = default_world().start_position
    for k, frame in enumerate(frames):
        assert frame["step"] == k
        assert np.allclose(frame["state"], x, atol=1e-12)
        x = step(pm, x, np.zeros(2))


def test_out_of_bounds_input_recorded_saturated(client):
    created = create_stepped(client)
    drive(client, created, [(2.0, -9.0)] * 3)
    resp = client.delete(f"/sessions/{created['id']}")
    assert resp.status_code == 200
    traj = load_trajectory(resp.json()["trial"])
    assert np.all(traj.inputs[:3, 0] == 0.5)    # alpha clamp
    assert np.all(traj.inputs[:3, 1] == -1.7)   # thrust clamp


def test_input_latching_ignores_stale_seq(client):
    created = create_stepped(client)
    with client.websocket_connect(created["channel"]) as ws:
        json.loads(ws.receive_text())
        ws.send_text(json.dumps({"type": "input", "alpha": 0.0, "thrust": 1.0, "seq": 5}))
        first = json.loads(ws.receive_text())
        # stale sequence number: input ignored, hold previous (zero-order hold)
        ws.send_text(json.dumps({"type": "input", "alpha": 0.4, "thrust": -1.0, "seq": 3}))
        second = json.loads(ws.receive_text())
    resp = client.delete(f"/sessions/{created['id']}")
    traj = load_trajectory(resp.json()["trial"])
    assert traj.inputs[0, 1] == 1.0
    assert traj.inputs[1, 1] == 1.0  # held, not -1.0
    assert first["step"] == 1 and second["step"] == 2


def test_create_then_end_without_ticks(client):
    created = create_stepped(client)
    resp = client.delete(f"/sessions/{created['id']}")
    traj = load_trajectory(resp.json()["trial"])
    assert len(traj) == 1
    assert traj.outcome == "aborted"


def test_trial_download_requires_ended_session(client):
    created = create_stepped(client)
    assert client.get(f"/sessions/{created['id']}/trial").status_code == 409
    client.delete(f"/sessions/{created['id']}")
    payload = client.get(f"/sessions/{created['id']}/trial").json()
    assert payload["filename"].startswith("trial_")
    assert payload["csv"].startswith("t,px,py")
    assert payload["sidecar"]["outcome"] == "aborted"


def test_same_seed_same_spawn_schedule(client):
    a = create_stepped(client, seed=77)
    b = create_stepped(client, seed=77)
    world = default_world()
    expected = activate_world(world, 77, 0.04)
    for created in (a, b):
        frames = drive(client, created, [(0.0, 0.0)] * 80)
        spawn_frames = [f for f in frames if "obstacleSpawned" in f["events"]]
        assert len(spawn_frames) == 1
        assert spawn_frames[0]["t"] == pytest.approx(expected.spawn_time, abs=1e-9)
        assert spawn_frames[0]["obstacle"] == expected.obstacle.as_list()


def test_unknown_session_404(client):
    assert client.delete("/sessions/zzz").status_code == 404
    assert client.get("/sessions/zzz/trial").status_code == 404


def test_scripted_session_lands_with_301_samples(client):
    world = default_world()
    seed = 4
    script = find_descent_start(world, seed, target_tick=300)
    frames, session_id = fly_stepped_session(client, script, seed)
    assert frames[-1]["terminal"]
    assert "landed" in frames[-1]["events"]
    assert frames[-1]["step"] == 300
    assert any("obstacleSpawned" in f["events"] for f in frames)

    payload = client.get(f"/sessions/{session_id}/trial").json()
    trial_file = client.trials_dir / payload["filename"]
    traj = load_trajectory(trial_file)
    assert len(traj) == 301
    assert traj.dt == 0.04
    assert traj.outcome == "landed"
    assert traj.t[-1] == pytest.approx(12.0, abs=1e-9)
    window = extract_window(traj, 4.5)
    assert len(window) == 113


def test_recorded_trial_feeds_training(client, tmp_path):
    world = default_world()
    seed = 4
    script = find_descent_start(world, seed, target_tick=300)
    fly_stepped_session(client, script, seed)
    from rotorreach.cli import main

    model_path = tmp_path / "model.json"
    rc = main([
        "train", "--trials", str(client.trials_dir), "-m", "2", "--seed", "0",
        "--out", str(model_path),
    ])
    assert rc == 0
    assert model_path.exists()


def test_overlay_attached_at_cadence(overlay_client):
    world = default_world()
    seed = 9
    script = find_descent_start(world, seed, target_tick=300)
    frames, _ = fly_stepped_session(overlay_client, script, seed, max_ticks=180)
    spawn_tick = next(f["step"] for f in frames if "obstacleSpawned" in f["events"])
    overlaid = [f for f in frames if f.get("overlay")]
    assert overlaid, "no overlay frames seen after spawn"
    for f in overlaid:
        assert f["step"] % 25 == 0
        assert f["step"] > spawn_tick
        grid = f["overlay"]["grid"]
        assert len(grid["values"]) == grid["nx"] * grid["ny"]
        assert 0.0 <= f["overlay"]["risk"] <= 1.0
        assert f["overlay"]["horizon"] == pytest.approx(2.0)


def test_realtime_session_smoke(client):
    created = client.post("/sessions", json={"seed": 0, "mode": "realtime"}).json()
    with client.websocket_connect(created["channel"]) as ws:
        first = json.loads(ws.receive_text())
        assert first["step"] == 0
        ws.send_text(json.dumps({"type": "input", "alpha": 0.0, "thrust": 0.5, "seq": 0}))
        seen = [json.loads(ws.receive_text()) for _ in range(5)]
    steps = [f["step"] for f in seen]
    assert steps == sorted(steps)
    assert steps[-1] >= 1
    resp = client.delete(f"/sessions/{created['id']}")
    assert resp.status_code == 200


def test_invalid_mode_rejected(client):
    assert client.post("/sessions", json={"mode": "warp"}).status_code == 422
