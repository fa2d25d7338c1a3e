"""Command-line pipeline: generate trials, train, predict, compare, risk, serve.

Every command is deterministic given its flags and seeds; reruns write
bit-identical files.  Exit codes: 0 success, 2 usage error, 3 data error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import gaussmix, gmr, montecarlo, plant, prediction, reduction, risk, scenario, trajectories
from .gaussmix import EmConfig, MixtureError, fit_em, load_mixture, save_mixture
from .gmr import split_blocks
from .montecarlo import McConfig, polygon_area, run_monte_carlo
from .plant import build_plant
from .prediction import Belief, PredictConfig, density_grid, grid_to_csv, predict
from .risk import DangerZone, collision_probability
from .trajectories import TrajectoryError, WindowError, extract_window, stack_windows

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class DataError(Exception):
    """Input files or trial data unusable."""


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, TrajectoryError, MixtureError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (np.linalg.LinAlgError, FloatingPointError, gaussmix.NonPositiveDefiniteError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rotorreach",
        description="Stochastic pilot models and mixture state prediction for a planar multi-rotor",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic piloting trials")
    g.add_argument("--world", type=Path, help="world config JSON (default built-in)")
    g.add_argument("--pilot", type=Path, help="behavior model JSON for the synthetic pilot")
    g.add_argument("--plant", type=Path, help="plant parameter JSON")
    g.add_argument("-n", "--trials", type=_positive_int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True, help="output trials directory")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit a behavior model from recorded trials")
    t.add_argument("--trials", type=Path, required=True, help="directory of trial_NNN.csv files")
    t.add_argument("--window", type=float, default=4.5, help="post-spawn window seconds")
    t.add_argument("-m", "--components", type=_positive_int, default=3)
    t.add_argument("--holdout", type=int, default=0, help="trials held out for validation")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--max-iterations", type=int, default=500)
    t.add_argument("--tolerance", type=float, default=1e-6)
    t.add_argument("--out", type=Path, required=True, help="behavior model JSON path")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="propagate an uncertain state forward")
    _add_predict_args(pr)
    pr.add_argument("--out-beliefs", type=Path, help="belief trajectory JSON")
    pr.add_argument("--out-grid", type=Path, help="density grid CSV (per report instant)")
    pr.add_argument("--grid", type=_parse_grid, default=None, help="x0,x1,y0,y1,nx,ny")
    pr.add_argument("--zone", type=DangerZone.from_flag, help="xmin,xmax,ymin,ymax")
    pr.add_argument("--out-risk", type=Path, help="risk profile CSV (needs --zone)")
    pr.add_argument(
        "--trace-reduction", type=Path,
        help="dump per-step merge records (pair, score, result index) as JSON",
    )
    pr.set_defaults(func=cmd_predict)

    c = sub.add_parser("compare", help="prediction vs Monte-Carlo cross-check")
    _add_predict_args(c)
    c.add_argument("--samples", type=_positive_int, default=5000)
    c.add_argument("--mode", choices=montecarlo.INPUT_MODES, default="uniform")
    c.add_argument("--saturate", action="store_true", help="clamp sampled behavior inputs")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--grid", type=_parse_grid, default=None, help="x0,x1,y0,y1,nx,ny")
    c.add_argument("--density-quantile", type=float, default=0.1)
    c.add_argument("--out-dir", type=Path, required=True)
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("risk", help="danger-zone collision probability over time")
    _add_predict_args(r)
    r.add_argument("--zone", type=DangerZone.from_flag, required=True)
    r.add_argument("--out", type=Path, required=True, help="risk profile CSV")
    r.set_defaults(func=cmd_risk)

    rc = sub.add_parser("regression-curve", help="conditional input mean/std vs time")
    rc.add_argument("--model", type=Path, required=True)
    rc.add_argument("--t0", type=float, default=0.0)
    rc.add_argument("--t1", type=float, default=4.5)
    rc.add_argument("--dt", type=float, default=0.04)
    rc.add_argument("--out", type=Path, required=True)
    rc.set_defaults(func=cmd_regression_curve)

    s = sub.add_parser("serve", help="run the live piloting session server")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=None, help="default: PORT env or 8000")
    s.add_argument("--trials-dir", type=Path, default=None, help="default: TRIALS_DIR env")
    s.add_argument("--world", type=Path)
    s.add_argument("--plant", type=Path)
    s.add_argument("--model", type=Path, help="behavior model for prediction overlays")
    s.set_defaults(func=cmd_serve)

    return p


def _add_predict_args(sp) -> None:
    sp.add_argument("--model", type=Path, required=True, help="behavior model JSON")
    sp.add_argument("--init-belief", type=Path, required=True, help="initial state mixture JSON")
    sp.add_argument("--plant", type=Path, help="plant parameter JSON")
    sp.add_argument("--horizon", type=float, required=True, help="seconds")
    sp.add_argument("--max-components", type=_positive_int, default=16)
    sp.add_argument("--at", type=_parse_times, default=None, help="report instants, e.g. 1.5,3,4")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _parse_times(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p]


def _parse_grid(text: str):
    parts = text.split(",")
    if len(parts) != 6:
        raise argparse.ArgumentTypeError("grid flag needs x0,x1,y0,y1,nx,ny")
    x0, x1, y0, y1 = map(float, parts[:4])
    nx, ny = int(parts[4]), int(parts[5])
    return (x0, x1), (y0, y1), nx, ny


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _load_plant(args) -> plant.PlantModel:
    params = plant.load_params(args.plant) if args.plant else plant.PlantParams()
    return build_plant(params)


def _load_behavior(path: Path) -> gmr.BehaviorModel:
    return split_blocks(load_mixture(path))


def _load_belief(path: Path) -> Belief:
    return Belief(mixture=load_mixture(path), time=0.0, step_index=0)


def cmd_generate(args) -> int:
    world = scenario.load_world(args.world) if args.world else scenario.default_world()
    behavior = _load_behavior(args.pilot) if args.pilot else scenario.default_pilot_model()
    pilot = scenario.SyntheticPilot(behavior=behavior)
    params = plant.load_params(args.plant) if args.plant else plant.PlantParams()
    trials = scenario.generate_synthetic_trials(pilot, world, args.trials, args.seed, params)
    args.out.mkdir(parents=True, exist_ok=True)
    for i, tr in enumerate(trials):
        trajectories.save_trajectory(tr, args.out / f"trial_{i:03d}.csv")
    landed = sum(tr.outcome == "landed" for tr in trials)
    print(f"wrote {len(trials)} trials to {args.out} ({landed} landed)")
    return EXIT_OK


def cmd_train(args) -> int:
    paths = trajectories.trial_paths(args.trials)
    if not paths:
        raise DataError(f"no trial files found under {args.trials}")
    windows = []
    labels = []
    for path in paths:
        tr = trajectories.load_trajectory(path)
        try:
            windows.append(extract_window(tr, args.window))
            labels.append((path.name, "included", len(windows[-1])))
        except WindowError as exc:
            labels.append((path.name, f"excluded ({exc})", 0))
    for name, status, rows in labels:
        print(f"{name}: {status}" + (f", {rows} rows" if rows else ""))

    usable = len(windows)
    if usable == 0:
        raise DataError("no usable landed trials cover the training window")
    holdout = args.holdout
    if holdout < 0 or holdout >= usable:
        raise DataError(f"holdout {holdout} must be in [0, {usable - 1}]")

    train_windows = windows[: usable - holdout] if holdout else windows
    val_windows = windows[usable - holdout :] if holdout else []
    data = stack_windows(train_windows)
    cfg = EmConfig(
        num_components=args.components,
        max_iterations=args.max_iterations,
        log_likelihood_tolerance=args.tolerance,
        seed=args.seed,
    )
    result = fit_em(data, cfg)
    split_blocks(result.mixture)  # reject models unusable for regression
    save_mixture(result.mixture, args.out)
    print(
        f"trained {args.components}-component model on {len(train_windows)} trials "
        f"({data.shape[0]} rows), {result.iterations} iterations, "
        f"log-likelihood {result.log_likelihood:.6f}"
    )
    if val_windows:
        val = stack_windows(val_windows)
        val_ll = float(np.sum(result.mixture.log_density(val)))
        print(f"validation: {len(val_windows)} trials ({val.shape[0]} rows), "
              f"log-likelihood {val_ll:.6f}")
    print(f"model written to {args.out}")
    return EXIT_OK


def _run_prediction(args, collect_merges: bool = False):
    pm = _load_plant(args)
    bm = _load_behavior(args.model)
    initial = _load_belief(args.init_belief)
    steps = int(np.floor(args.horizon / pm.dt + 1e-9))
    if abs(steps * pm.dt - args.horizon) > 1e-9:
        print(
            f"warning: horizon {args.horizon}s is not a multiple of dt={pm.dt}s; "
            f"using {steps} steps ({steps * pm.dt:.6g}s)",
            file=sys.stderr,
        )
    cfg = PredictConfig(horizon_steps=steps, max_components=args.max_components)
    result = predict(initial, pm, bm, cfg, collect_merges=collect_merges)
    if collect_merges:
        traj, merges = result
        return pm, bm, initial, traj, merges
    return pm, bm, initial, result


def _report_beliefs(traj, at_times):
    if not at_times:
        return [traj.final]
    return [traj.at_time(t) for t in at_times]


def cmd_predict(args) -> int:
    trace = args.trace_reduction is not None
    if trace:
        pm, bm, initial, traj, merges = _run_prediction(args, collect_merges=True)
        records = [
            {
                "step": step + 1,
                "merges": [
                    {"pair": list(r.pair), "klUpperBound": r.kl_upper_bound,
                     "resultIndex": r.result_index}
                    for r in step_records
                ],
            }
            for step, step_records in enumerate(merges)
            if step_records
        ]
        args.trace_reduction.write_text(json.dumps(records, indent=2, sort_keys=True))
        print(f"reduction trace written to {args.trace_reduction}")
    else:
        pm, bm, initial, traj = _run_prediction(args)
    if args.out_beliefs:
        prediction.save_belief_trajectory(traj, args.out_beliefs)
        print(f"beliefs written to {args.out_beliefs}")
    reports = _report_beliefs(traj, args.at)
    for belief in reports:
        mean, _ = belief.mixture.moments()
        print(
            f"t={belief.time:.2f}s step={belief.step_index} "
            f"components={len(belief.mixture)} mean_position=({mean[0]:.3f},{mean[1]:.3f})"
        )
        if args.out_grid:
            if args.grid is None:
                raise DataError("--out-grid requires --grid x0,x1,y0,y1,nx,ny")
            (xr, yr, nx, ny) = args.grid
            grid = density_grid(belief, xr, yr, nx, ny)
            path = _suffixed(args.out_grid, belief.time) if len(reports) > 1 else args.out_grid
            grid_to_csv(grid, path)
            print(f"grid written to {path}")
        if args.zone is not None:
            prob = collision_probability(belief, args.zone)
            print(f"collision probability at t={belief.time:.2f}s: {prob:.6g}")
    if args.out_risk:
        if args.zone is None:
            raise DataError("--out-risk requires --zone")
        profile = risk.risk_profile(traj, args.zone)
        _write_risk_csv(profile, args.out_risk)
        print(f"risk profile written to {args.out_risk}")
    return EXIT_OK


def cmd_risk(args) -> int:
    _, _, _, traj = _run_prediction(args)
    beliefs = _report_beliefs(traj, args.at) if args.at else traj.beliefs
    profile = [(b.time, collision_probability(b, args.zone)) for b in beliefs]
    _write_risk_csv(profile, args.out)
    for t, p in profile:
        print(f"t={t:.2f}s probability={p:.6g}")
    print(f"risk profile written to {args.out}")
    return EXIT_OK


def _write_risk_csv(profile, path: Path) -> None:
    lines = ["t,probability"]
    lines += [f"{t:.17g},{p:.17g}" for t, p in profile]
    path.write_text("\n".join(lines) + "\n")


def _suffixed(path: Path, time: float) -> Path:
    return path.with_name(f"{path.stem}_t{time:g}{path.suffix}")


def cmd_compare(args) -> int:
    pm, bm, initial, traj = _run_prediction(args)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)

    mc_cfg = McConfig(
        samples=args.samples,
        horizon_steps=traj.final.step_index,
        input_mode=args.mode,
        seed=args.seed,
        saturate=args.saturate,
    )
    mc = run_monte_carlo(initial, pm, bm, mc_cfg)

    final = traj.final
    pred_mean, pred_cov = final.mixture.moments()
    mean_diff = mc.empirical_mean - pred_mean
    cov_diff = float(np.linalg.norm(mc.empirical_cov - pred_cov))

    # fraction of samples scoring above the predicted density's own quantile
    pos = gaussmix.marginal(final.mixture, [0, 1])
    ref = pos.sample(20000, seed=args.seed + 1)
    ref_density = pos.density(ref)
    threshold = float(np.quantile(ref_density, args.density_quantile))
    sample_density = pos.density(mc.final_states[:, :2])
    fraction = float(np.mean(sample_density >= threshold))

    if args.grid is not None:
        (xr, yr, nx, ny) = args.grid
    else:
        lo = mc.final_states[:, :2].min(axis=0) - 1.0
        hi = mc.final_states[:, :2].max(axis=0) + 1.0
        xr, yr, nx, ny = (lo[0], hi[0]), (lo[1], hi[1]), 80, 80
    grid_to_csv(density_grid(final, xr, yr, nx, ny), out / "grid.csv")

    _write_samples_csv(mc.final_states, out / "samples.csv")
    _write_hull_csv(mc.convex_hull_2d, out / "hull.csv")
    report = {
        "horizonSeconds": final.time,
        "samples": args.samples,
        "mode": args.mode,
        "meanDiff": mean_diff.tolist(),
        "covDiffFrobenius": cov_diff,
        "fractionOfSamplesAboveDensityQuantile": fraction,
        "densityQuantile": args.density_quantile,
        "hullArea": polygon_area(mc.convex_hull_2d),
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def _write_samples_csv(states: np.ndarray, path: Path) -> None:
    lines = [",".join(plant.STATE_LABELS)]
    lines += [",".join(f"{v:.17g}" for v in row) for row in states]
    path.write_text("\n".join(lines) + "\n")


def _write_hull_csv(hull: np.ndarray, path: Path) -> None:
    lines = ["px,py"]
    lines += [f"{x:.17g},{y:.17g}" for x, y in hull]
    path.write_text("\n".join(lines) + "\n")


def cmd_regression_curve(args) -> int:
    bm = _load_behavior(args.model)
    curve = gmr.regression_curve(bm, args.t0, args.t1, args.dt)
    lines = ["t,mean_alpha,mean_T,std_alpha,std_T"]
    lines += [",".join(f"{v:.17g}" for v in row) for row in curve]
    args.out.write_text("\n".join(lines) + "\n")
    print(f"{curve.shape[0]} curve points written to {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import os

    import uvicorn

    from .service import ServiceConfig, create_app

    port = args.port if args.port is not None else int(os.environ.get("PORT", "8000"))
    trials_dir = args.trials_dir or Path(os.environ.get("TRIALS_DIR", "trials"))
    world = scenario.load_world(args.world) if args.world else scenario.default_world()
    params = plant.load_params(args.plant) if args.plant else plant.PlantParams()
    overlay = _load_behavior(args.model) if args.model else None
    config = ServiceConfig(
        trials_dir=Path(trials_dir),
        world=world,
        plant_params=params,
        overlay_model=overlay,
    )
    uvicorn.run(create_app(config), host=args.host, port=port)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
