"""End-to-end experiment: collect synthetic trials, train, predict, compare.

Writes every artifact (trials, model, belief trajectory, density grids,
Monte-Carlo samples/hulls, risk profile, regression curve) into an output
directory using the same CLI a full study workflow would use.

    python3 scripts/run_pipeline.py out/ --trials 121 --seed 20240901
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from rotorreach.cli import main as cli
from rotorreach.gaussmix import save_mixture
from rotorreach.scenario import DEFAULT_PREDICTION_START, default_initial_belief


def run(out: Path, trials: int, seed: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    trials_dir = out / "trials"
    model = out / "model.json"
    belief = out / "belief.json"
    save_mixture(default_initial_belief(np.array(DEFAULT_PREDICTION_START)).mixture, belief)

    steps = [
        ["generate", "-n", str(trials), "--seed", str(seed), "--out", str(trials_dir)],
        ["train", "--trials", str(trials_dir), "--window", "4.5", "-m", "3",
         "--holdout", "1", "--seed", "1", "--out", str(model)],
        ["regression-curve", "--model", str(model), "--out", str(out / "curve.csv")],
        ["predict", "--model", str(model), "--init-belief", str(belief),
         "--horizon", "4", "--at", "1.5,3,4",
         "--out-beliefs", str(out / "beliefs.json"),
         "--grid=-15,15,-10,20,120,120", "--out-grid", str(out / "grid.csv"),
         "--zone=-4.5,4.5,0,1", "--out-risk", str(out / "risk.csv")],
        ["compare", "--model", str(model), "--init-belief", str(belief),
         "--horizon", "4", "--samples", "5000", "--mode", "uniform", "--seed", "2",
         "--out-dir", str(out / "compare_uniform")],
        ["compare", "--model", str(model), "--init-belief", str(belief),
         "--horizon", "4", "--samples", "5000", "--mode", "behavior", "--seed", "2",
         "--out-dir", str(out / "compare_behavior")],
    ]
    for argv in steps:
        print("$ rotorreach " + " ".join(argv))
        rc = cli(argv)
        if rc != 0:
            raise SystemExit(rc)
    print(f"\nartifacts in {out}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", type=Path)
    parser.add_argument("--trials", type=int, default=121)
    parser.add_argument("--seed", type=int, default=20240901)
    args = parser.parse_args()
    run(args.out, args.trials, args.seed)
