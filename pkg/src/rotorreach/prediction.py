"""Belief propagation through the linear plant under the learned input model.

One step maps an L-component state mixture and the M-component conditional
input mixture at the current time into an (M*L)-component mixture; mixture
reduction caps the growth once the count exceeds the configured budget.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gaussmix import (
    GaussianComponent,
    Mixture,
    MixtureError,
    marginal,
    mixture_from_json,
    mixture_to_json,
)
from .gmr import BehaviorModel, condition_on_time
from .plant import PlantModel
from .reduction import MergeRecord, reduce_mixture

__all__ = [
    "Belief",
    "PredictConfig",
    "BeliefTrajectory",
    "DensityGrid",
    "step_belief",
    "predict",
    "density_grid",
]

RAW_COMPONENT_CAP = 10**6
ETA_WARN_TOL = 1e-6


@dataclass(frozen=True)
class Belief:
    """State mixture at a prediction step; time is seconds since obstacle spawn."""

    mixture: Mixture
    time: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        if self.mixture.dimension != 6:
            raise MixtureError(f"belief must be 6-dimensional, got {self.mixture.dimension}")


@dataclass(frozen=True)
class PredictConfig:
    horizon_steps: int
    max_components: int = 16
    reduce_each_step: bool = True

    def __post_init__(self):
        if self.horizon_steps < 0:
            raise ValueError("horizon_steps must be >= 0")
        if self.max_components < 1:
            raise ValueError("max_components must be >= 1")


@dataclass(frozen=True)
class BeliefTrajectory:
    """Beliefs per step, index 0 being the initial belief."""

    beliefs: tuple[Belief, ...]

    def __len__(self) -> int:
        return len(self.beliefs)

    @property
    def final(self) -> Belief:
        return self.beliefs[-1]

    def at_time(self, t: float) -> Belief:
        """Belief at the largest step time not exceeding ``t``."""
        best = self.beliefs[0]
        for b in self.beliefs:
            if b.time <= t + 1e-9:
                best = b
        return best


def step_belief(belief: Belief, pm: PlantModel, bm: BehaviorModel) -> Belief:
    """One propagation step: expand by the conditional input mixture.

    Output components are ordered input-component-major, state-component-minor.
    The raw product weights must already sum to one (both factors are
    normalized); a deviation beyond 1e-6 is surfaced as a warning before
    renormalizing.
    """
    state_mix = belief.mixture
    dist = condition_on_time(bm, belief.time)
    input_mix = dist.mixture

    n_raw = len(input_mix) * len(state_mix)
    if n_raw > RAW_COMPONENT_CAP:
        raise ValueError(
            f"refusing to build {n_raw} raw components (cap {RAW_COMPONENT_CAP}); "
            "reduce max_components or the model size"
        )

    a, b = pm.a, pm.b
    input_covs = [b @ c.covariance @ b.T for c in input_mix.components]
    input_means = [b @ c.mean for c in input_mix.components]

    raw_weights = []
    comps = []
    for i, ci in enumerate(input_mix.components):
        for cj in state_mix.components:
            w = ci.weight * cj.weight
            mean = a @ cj.mean + input_means[i]
            cov = input_covs[i] + a @ cj.covariance @ a.T
            raw_weights.append(w)
            comps.append((w, mean, cov))

    eta = float(np.sum(raw_weights))
    if abs(eta - 1.0) > ETA_WARN_TOL:
        warnings.warn(
            f"raw propagation weights sum to {eta!r}, expected 1; renormalizing",
            RuntimeWarning,
            stacklevel=2,
        )
    if abs(eta - 1.0) > 1e-3:
        raise MixtureError(
            f"normalization constant {eta} is inconsistent with normalized weight factors"
        )

    components = tuple(GaussianComponent(w / eta, mean, cov) for w, mean, cov in comps)
    return Belief(
        mixture=Mixture(components),
        time=belief.time + pm.dt,
        step_index=belief.step_index + 1,
    )


def predict(
    initial: Belief,
    pm: PlantModel,
    bm: BehaviorModel,
    cfg: PredictConfig,
    collect_merges: bool = False,
) -> BeliefTrajectory | tuple[BeliefTrajectory, list[list[MergeRecord]]]:
    """Propagate ``cfg.horizon_steps`` steps, reducing after each expansion.

    Reduction runs only when the component count exceeds ``max_components``
    and ``reduce_each_step`` is set.  Returns all intermediate beliefs;
    with ``collect_merges`` also returns the per-step merge records.
    """
    beliefs = [initial]
    merges: list[list[MergeRecord]] = []
    current = initial
    for _ in range(cfg.horizon_steps):
        current = step_belief(current, pm, bm)
        step_records: list[MergeRecord] = []
        if cfg.reduce_each_step and len(current.mixture) > cfg.max_components:
            reduced, step_records = reduce_mixture(current.mixture, cfg.max_components)
            current = Belief(reduced, time=current.time, step_index=current.step_index)
        beliefs.append(current)
        merges.append(step_records)
    traj = BeliefTrajectory(tuple(beliefs))
    return (traj, merges) if collect_merges else traj


@dataclass(frozen=True)
class DensityGrid:
    """Marginal position density sampled on a rectangular grid.

    ``values[iy, ix]`` is the density at (x[ix], y[iy]). ``regularized``
    reports whether any component's position marginal needed a tiny diagonal
    bump to be evaluable.
    """

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    regularized: bool = False

    @property
    def cell_area(self) -> float:
        return float((self.x[1] - self.x[0]) * (self.y[1] - self.y[0]))


def density_grid(
    belief: Belief,
    x_range: tuple[float, float],
    y_range: tuple[float, float],
    nx: int,
    ny: int,
) -> DensityGrid:
    """Evaluate the (p_x, p_y) marginal mixture density on a regular grid."""
    if nx < 2 or ny < 2:
        raise ValueError("grid needs nx >= 2 and ny >= 2")
    pos = marginal(belief.mixture, [0, 1])

    regularized = False
    comps = []
    for c in pos.components:
        try:
            np.linalg.cholesky(c.covariance)
            comps.append(c)
        except np.linalg.LinAlgError:
            regularized = True
            comps.append(
                GaussianComponent(c.weight, c.mean, c.covariance + 1e-12 * np.eye(2))
            )
    pos = Mixture(tuple(comps))

    xs = np.linspace(x_range[0], x_range[1], nx)
    ys = np.linspace(y_range[0], y_range[1], ny)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    vals = pos.density(pts).reshape(ny, nx)
    return DensityGrid(x=xs, y=ys, values=vals, regularized=regularized)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def trajectory_to_json(traj: BeliefTrajectory) -> dict:
    return {
        "beliefs": [
            {
                "time": b.time,
                "step_index": b.step_index,
                "mixture": mixture_to_json(b.mixture),
            }
            for b in traj.beliefs
        ]
    }


def trajectory_from_json(obj: dict) -> BeliefTrajectory:
    beliefs = tuple(
        Belief(
            mixture=mixture_from_json(entry["mixture"]),
            time=float(entry["time"]),
            step_index=int(entry["step_index"]),
        )
        for entry in obj["beliefs"]
    )
    return BeliefTrajectory(beliefs)


def save_belief_trajectory(traj: BeliefTrajectory, path) -> None:
    Path(path).write_text(json.dumps(trajectory_to_json(traj), indent=2, sort_keys=True))


def load_belief_trajectory(path) -> BeliefTrajectory:
    return trajectory_from_json(json.loads(Path(path).read_text()))


def grid_to_csv(grid: DensityGrid, path) -> None:
    """CSV matrix with a two-line axes header (ranges and sizes first)."""
    lines = [
        f"# x,{grid.x[0]:.17g},{grid.x[-1]:.17g},{len(grid.x)}",
        f"# y,{grid.y[0]:.17g},{grid.y[-1]:.17g},{len(grid.y)}",
    ]
    for row in grid.values:
        lines.append(",".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
