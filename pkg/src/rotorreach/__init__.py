"""Stochastic pilot-behavior models and Gaussian-mixture state prediction
for a planar multi-rotor, with a Monte-Carlo cross-check, danger-zone risk
evaluation, and a live piloting service for collecting training trials."""

from .gaussmix import (
    EmConfig,
    EmResult,
    GaussianComponent,
    Mixture,
    MixtureError,
    NonPositiveDefiniteError,
    fit_em,
    marginal,
)
from .gmr import BehaviorModel, InputDistribution, condition_on_time, regression_curve, split_blocks
from .montecarlo import McConfig, McResult, convex_hull, polygon_area, run_monte_carlo
from .plant import PlantModel, PlantParams, build_plant, rollout, step
from .prediction import (
    Belief,
    BeliefTrajectory,
    DensityGrid,
    PredictConfig,
    density_grid,
    predict,
    step_belief,
)
from .reduction import MergeRecord, kl_upper_bound, merge_pair, reduce_mixture
from .risk import DangerZone, collision_probability, risk_profile
from .trajectories import (
    TrainingWindow,
    Trajectory,
    TrajectoryError,
    extract_window,
    load_trajectory,
    save_trajectory,
)

__version__ = "0.1.0"
