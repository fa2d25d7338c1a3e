"""Acceptance gate: one test per release criterion, each printing a pass/fail
line with its runtime.  Tolerances are pinned here and nowhere else."""

import contextlib
import itertools
import json
import time
from pathlib import Path

import numpy as np
import pytest

from rotorreach.gaussmix import EmConfig, GaussianComponent, Mixture, fit_em, marginal, save_mixture
from rotorreach.gmr import condition_on_time, split_blocks
from rotorreach.montecarlo import McConfig, convex_hull, polygon_area, run_monte_carlo
from rotorreach.plant import build_plant
from rotorreach.prediction import Belief, PredictConfig, predict
from rotorreach.reduction import kl_upper_bound, reduce_mixture
from rotorreach.risk import DangerZone, collision_probability
from rotorreach.scenario import (
    DEFAULT_PREDICTION_START,
    default_initial_belief,
    default_pilot,
    default_pilot_model,
    default_world,
    generate_synthetic_trials,
)
from rotorreach.trajectories import extract_window, stack_windows


@contextlib.contextmanager
def criterion(name: str, limit_s: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"FAIL: {name}")
        raise
    elapsed = time.perf_counter() - start
    if elapsed >= limit_s:
        print(f"FAIL: {name} (runtime {elapsed:.1f}s exceeds {limit_s:.0f}s)")
        raise AssertionError(f"{name}: runtime {elapsed:.1f}s over budget {limit_s:.0f}s")
    print(f"PASS: {name} ({elapsed:.2f}s < {limit_s:.0f}s)")


def test_plant_fidelity():
    with criterion("plant fidelity: transition matrices match the model entrywise", 1.0):
        pm = build_plant()
        dt, g, m, ix = 0.04, 9.8, 0.25, 0.01
        k1, k2, k3 = -0.1, -1.0, -30.0
        expected_a = np.eye(6)
        expected_a[0, 3] = expected_a[1, 4] = expected_a[2, 5] = dt
        expected_a[3, 2] = g * dt
        expected_a[4, 4] += k1 * dt
        expected_a[5, 2] = k2 * dt
        expected_a[5, 5] += k3 * dt
        expected_b = np.zeros((6, 2))
        expected_b[4, 1] = dt / m
        expected_b[5, 0] = dt / ix
        assert np.abs(pm.a - expected_a).max() <= 1e-15
        assert np.abs(pm.b - expected_b).max() <= 1e-15
        assert pm.a[3, 2] == 0.392
        assert pm.b[5, 0] == 4.0


def test_gmr_correctness():
    with criterion("regression: conditional density matches grid-slice oracle", 10.0):
        c1 = GaussianComponent(
            0.45,
            np.array([1.2, 0.3, -0.6]),
            np.array([[0.9, 0.25, -0.1], [0.25, 1.2, 0.35], [-0.1, 0.35, 1.0]]),
        )
        c2 = GaussianComponent(
            0.55,
            np.array([3.1, -0.5, 0.8]),
            np.array([[1.1, -0.3, 0.15], [-0.3, 0.8, -0.25], [0.15, -0.25, 1.3]]),
        )
        joint = Mixture((c1, c2))
        bm = split_blocks(joint)
        a_grid = np.linspace(-9.0, 9.0, 501)
        t_grid = np.linspace(-9.0 + 0.8, 9.0 + 0.8, 501)
        ga, gt = np.meshgrid(a_grid, t_grid)
        rng = np.random.default_rng(123)
        for t in rng.uniform(0.0, 4.5, size=10):
            cond = condition_on_time(bm, float(t)).mixture
            pts = np.column_stack([ga.ravel(), gt.ravel()])
            ours = cond.density(pts).reshape(ga.shape)
            joint_pts = np.column_stack([np.full(pts.shape[0], t), pts[:, 0], pts[:, 1]])
            joint_vals = joint.density(joint_pts).reshape(ga.shape)
            norm = np.trapezoid(np.trapezoid(joint_vals, t_grid, axis=0), a_grid)
            brute = joint_vals / norm
            assert np.abs(ours - brute).max() < 1e-6

        # single-component case against textbook Gaussian conditioning
        single = split_blocks(Mixture((c1,)))
        cov = np.asarray(c1.covariance)
        mu = np.asarray(c1.mean)
        for t in rng.uniform(-2.0, 6.0, size=5):
            dist = condition_on_time(single, float(t)).mixture
            expected_mean = mu[1:] + cov[1:, 0] / cov[0, 0] * (t - mu[0])
            expected_cov = cov[1:, 1:] - np.outer(cov[1:, 0], cov[1:, 0]) / cov[0, 0]
            assert np.abs(dist.means[0] - expected_mean).max() <= 1e-12
            assert np.abs(dist.covariances[0] - expected_cov).max() <= 1e-12


def test_reduction_moment_preservation():
    with criterion("reduction: moments preserved, scores nonnegative", 30.0):
        rng = np.random.default_rng(7)
        for trial in range(200):
            comps = []
            for _ in range(48):
                root = rng.normal(size=(6, 6)) * 0.4
                comps.append(
                    GaussianComponent(
                        rng.uniform(0.05, 1.0),
                        rng.normal(scale=2.0, size=6),
                        root @ root.T + 0.05 * np.eye(6),
                    )
                )
            mix = Mixture(tuple(comps))
            mean0, cov0 = mix.moments()
            reduced, records = reduce_mixture(mix, 16)
            mean1, cov1 = reduced.moments()
            assert len(reduced) == 16
            assert np.abs(mean0 - mean1).max() <= 1e-10
            assert np.abs(cov0 - cov1).max() <= 1e-10
            assert all(r.kl_upper_bound >= -1e-12 for r in records)
            if trial < 25:  # exhaustive pair scan on a subset
                for i, j in itertools.combinations(range(48), 2):
                    assert kl_upper_bound(mix.components[i], mix.components[j]) >= -1e-12
            dup = mix.components[trial % 48]
            assert kl_upper_bound(dup, dup) == 0.0


def test_propagation_oracle_equivalence():
    with criterion("propagation matches 50k-sample statistics", 120.0):
        pm = build_plant()
        bm = default_pilot_model()
        initial = default_initial_belief(np.array(DEFAULT_PREDICTION_START))
        traj = predict(initial, pm, bm, PredictConfig(horizon_steps=100, max_components=16))
        assert traj.final.time == pytest.approx(4.0, abs=1e-9)

        n = 50_000
        mc = run_monte_carlo(
            initial, pm, bm,
            McConfig(samples=n, horizon_steps=100, input_mode="behavior", seed=2024, saturate=False),
        )
        mean, cov = traj.final.mixture.moments()
        mean_se = np.sqrt(np.diag(cov) / n)
        assert np.all(np.abs(mc.empirical_mean - mean) <= 3.0 * mean_se)

        centered = mc.final_states - mc.final_states.mean(axis=0)
        pairwise = np.einsum("ni,nj->nij", centered, centered)
        cov_se = np.sqrt(pairwise.var(axis=0) / n)
        assert np.all(np.abs(mc.empirical_cov - cov) <= 5.0 * cov_se)


def test_pipeline_closure_at_published_scale():
    with criterion("pipeline closure: 121 trials retrain the pilot model", 120.0):
        pilot = default_pilot()
        world = default_world()
        trials = generate_synthetic_trials(pilot, world, 121, seed=20240901)
        assert len(trials) == 121
        windows = [extract_window(tr, 4.5) for tr in trials]
        assert all(len(w) == 113 for w in windows)
        assert sum(w.duration for w in windows) == pytest.approx(544.5, abs=1e-9)

        data = stack_windows(windows)
        result = fit_em(data, EmConfig(num_components=3, seed=7))
        fit = result.mixture
        truth = pilot.behavior.joint
        best_mean_err = np.inf
        best_weight_err = np.inf
        for perm in itertools.permutations(range(3)):
            p = list(perm)
            mean_err = np.abs(fit.means[p] - truth.means).max()
            if mean_err < best_mean_err:
                best_mean_err = mean_err
                best_weight_err = np.abs(fit.weights[p] - np.asarray(truth.weights)).max()
        assert best_mean_err <= 0.1
        assert best_weight_err <= 0.05


def test_conservativeness_and_risk_agreement():
    with criterion("behavior-weighted prediction beats uniform reachability", 60.0):
        pm = build_plant()
        bm = default_pilot_model()
        initial = default_initial_belief(np.array(DEFAULT_PREDICTION_START))
        world = default_world()
        dz = world.danger_zone
        zone = DangerZone(dz.x_min, dz.x_max, dz.y_min, dz.y_max)

        traj = predict(initial, pm, bm, PredictConfig(horizon_steps=100, max_components=16))
        n = 5000
        uni = run_monte_carlo(
            initial, pm, bm,
            McConfig(samples=n, horizon_steps=100, input_mode="uniform", seed=7, keep_steps=True),
        )
        beh = run_monte_carlo(
            initial, pm, bm,
            McConfig(samples=n, horizon_steps=100, input_mode="behavior", seed=7, keep_steps=True),
        )
        for step in (37, 75, 100):  # report instants 1.5, 3, 4 s (floor to tick)
            hull_uni = polygon_area(convex_hull(uni.per_step_states[step][:, :2]))
            hull_beh = polygon_area(convex_hull(beh.per_step_states[step][:, :2]))
            assert hull_uni > hull_beh, f"step {step}: {hull_uni} <= {hull_beh}"

            analytic = collision_probability(traj.beliefs[step], zone)
            states = beh.per_step_states[step]
            inside = (
                (states[:, 0] >= zone.x_min) & (states[:, 0] <= zone.x_max)
                & (states[:, 1] >= zone.y_min) & (states[:, 1] <= zone.y_max)
            )
            sigma = np.sqrt(max(analytic * (1.0 - analytic), 1e-12) / n)
            assert abs(analytic - inside.mean()) <= 3.0 * sigma


def test_cli_determinism(tmp_path):
    with criterion("CLI reruns produce bit-identical files", 120.0):
        from rotorreach.cli import main

        def run_all(root: Path) -> dict[str, bytes]:
            trials = root / "trials"
            assert main(["generate", "-n", "4", "--seed", "5", "--out", str(trials)]) == 0
            model = root / "model.json"
            assert main([
                "train", "--trials", str(trials), "-m", "3", "--seed", "1",
                "--holdout", "1", "--out", str(model),
            ]) == 0
            belief = root / "belief.json"
            save_mixture(
                default_initial_belief(np.array(DEFAULT_PREDICTION_START)).mixture, belief
            )
            assert main([
                "predict", "--model", str(model), "--init-belief", str(belief),
                "--horizon", "0.6", "--out-beliefs", str(root / "beliefs.json"),
                "--grid=-12,12,-6,14,30,30", "--out-grid", str(root / "grid.csv"),
            ]) == 0
            assert main([
                "compare", "--model", str(model), "--init-belief", str(belief),
                "--horizon", "0.6", "--samples", "400", "--mode", "behavior",
                "--seed", "3", "--out-dir", str(root / "cmp"),
            ]) == 0
            assert main([
                "risk", "--model", str(model), "--init-belief", str(belief),
                "--horizon", "0.4", "--zone=-4.5,4.5,0,1", "--out", str(root / "risk.csv"),
            ]) == 0
            assert main([
                "regression-curve", "--model", str(model), "--out", str(root / "curve.csv"),
            ]) == 0
            out = {}
            for path in sorted(root.rglob("*")):
                if path.is_file():
                    out[str(path.relative_to(root))] = path.read_bytes()
            return out

        first = run_all(tmp_path / "run1")
        second = run_all(tmp_path / "run2")
        assert list(first) == list(second)
        assert first == second


def test_secondary_live_session_round_trip(tmp_path):
    with criterion("[SECONDARY] scripted 12s live session round trip", 120.0):
        from fastapi.testclient import TestClient

        from rotorreach.cli import main
        from rotorreach.service import ServiceConfig, create_app
        from rotorreach.trajectories import load_trajectory
        from tests.scripted_client import find_descent_start, fly_stepped_session

        trials_dir = tmp_path / "trials"
        config = ServiceConfig(
            trials_dir=trials_dir,
            overlay_model=default_pilot_model(),
            overlay_every_ticks=50,
            overlay_grid=(16, 20),
        )
        world = default_world()
        seed = 4
        script = find_descent_start(world, seed, target_tick=300)
        with TestClient(create_app(config)) as client:
            frames, session_id = fly_stepped_session(client, script, seed)
            payload = client.get(f"/sessions/{session_id}/trial").json()

        assert frames[-1]["terminal"] and "landed" in frames[-1]["events"]
        assert any("obstacleSpawned" in f["events"] for f in frames)
        overlays = [f["overlay"] for f in frames if f.get("overlay")]
        assert overlays and all(0.0 <= o["risk"] <= 1.0 for o in overlays)

        traj = load_trajectory(trials_dir / payload["filename"])
        assert len(traj) == 301
        assert traj.dt == 0.04
        assert traj.t[-1] == pytest.approx(12.0, abs=1e-9)

        model_path = tmp_path / "model.json"
        rc = main([
            "train", "--trials", str(trials_dir), "-m", "2", "--seed", "0",
            "--out", str(model_path),
        ])
        assert rc == 0 and model_path.exists()
