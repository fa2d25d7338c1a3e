"""Exploration harness: trial outcomes and closed-loop model recovery.

Run while adjusting the default world / pilot model; not part of the tests.
"""

import itertools
import sys

import numpy as np

sys.path.insert(0, "src")

from rotorreach.gaussmix import EmConfig, fit_em
from rotorreach.gmr import split_blocks
from rotorreach.scenario import default_pilot, default_world, generate_synthetic_trials
from rotorreach.trajectories import extract_window, stack_windows


def match_components(true_means, fit_means, true_weights, fit_weights):
    best = None
    for perm in itertools.permutations(range(len(fit_means))):
        err = np.abs(fit_means[list(perm)] - true_means).max()
        werr = np.abs(fit_weights[list(perm)] - true_weights).max()
        key = err + werr
        if best is None or key < best[0]:
            best = (key, perm, err, werr)
    return best


def main(seed=20240901, n=121):
    pilot = default_pilot()
    world = default_world()
    trials = generate_synthetic_trials(pilot, world, n, seed)

    outcomes = {}
    usable = 0
    post_spawn = []
    land_x = []
    land_vy = []
    for tr in trials:
        outcomes[tr.outcome] = outcomes.get(tr.outcome, 0) + 1
        post = tr.t[-1] - tr.spawn_time
        post_spawn.append(post)
        if tr.outcome == "landed":
            land_x.append(tr.states[-1][0])
            land_vy.append(tr.states[-1][4])
            if post >= 4.5:
                usable += 1
    print("outcomes:", outcomes)
    print(f"usable (landed & >=4.5s post-spawn): {usable}/{n}")
    print(
        "post-spawn duration: min %.2f  mean %.2f  max %.2f"
        % (np.min(post_spawn), np.mean(post_spawn), np.max(post_spawn))
    )
    if land_x:
        print(
            "landing px: min %.2f mean %.2f max %.2f | vy: min %.2f max %.2f"
            % (np.min(land_x), np.mean(land_x), np.max(land_x), np.min(land_vy), np.max(land_vy))
        )
    if usable < n:
        bad = [
            (i, tr.outcome, tr.t[-1] - tr.spawn_time, tr.states[-1][:2])
            for i, tr in enumerate(trials)
            if not (tr.outcome == "landed" and tr.t[-1] - tr.spawn_time >= 4.5)
        ]
        for row in bad[:12]:
            print("  bad trial:", row)
        return

    windows = [extract_window(tr, 4.5) for tr in trials]
    data = stack_windows(windows)
    print("training rows:", data.shape, "expected", n * 113)

    res = fit_em(data, EmConfig(num_components=3, seed=7))
    fit = res.mixture
    true = pilot.behavior.joint
    tm, fm = np.asarray(true.means), np.asarray(fit.means)
    tw, fw = np.asarray(true.weights), np.asarray(fit.weights)
    key, perm, err, werr = match_components(tm, fm, tw, fw)
    print(f"EM iterations {res.iterations}  ll {res.log_likelihood:.1f}")
    print("best perm:", perm, " max|mean err|:", err, " max|weight err|:", werr)
    print("true means:\n", tm)
    print("fit means (matched):\n", fm[list(perm)])
    print("true w:", tw, " fit w:", fw[list(perm)])


if __name__ == "__main__":
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 20240901
    main(seed)
