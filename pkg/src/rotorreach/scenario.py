"""Landing-mission world: lanes, touchpad, pop-up obstacle, outcome detection,
and a synthetic pilot that substitutes for human participants.

The synthetic pilot flies constant-descent feedback until the obstacle
appears, then plays inputs sampled from its behavior model conditioned on
the elapsed time since spawn.  Trials generated this way close the loop:
windows extracted from them retrain a model that should recover the pilot's.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .gaussmix import GaussianComponent, Mixture
from .gmr import BehaviorModel, condition_on_time, split_blocks
from .plant import PlantModel, PlantParams, build_plant, saturate_input, step
from .prediction import Belief
from .trajectories import Trajectory

__all__ = [
    "Rect",
    "SpawnRule",
    "World",
    "ActiveWorld",
    "SyntheticPilot",
    "activate_world",
    "step_world",
    "pre_spawn_input",
    "generate_synthetic_trials",
    "default_world",
    "default_pilot_model",
    "default_initial_belief",
    "load_world",
    "save_world",
]


@dataclass(frozen=True)
class Rect:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError("rectangle bounds must be ordered")

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def overlaps_circle(self, cx: float, cy: float, r: float) -> bool:
        nearest_x = min(max(cx, self.x_min), self.x_max)
        nearest_y = min(max(cy, self.y_min), self.y_max)
        return (cx - nearest_x) ** 2 + (cy - nearest_y) ** 2 <= r * r

    def as_list(self) -> list[float]:
        return [self.x_min, self.x_max, self.y_min, self.y_max]


@dataclass(frozen=True)
class SpawnRule:
    """When and where the obstacle may pop up (one spawn per trial)."""

    t_min: float
    t_max: float
    candidates: tuple[tuple[float, float], ...]
    width: float
    height: float

    def __post_init__(self):
        if not 0.0 <= self.t_min <= self.t_max:
            raise ValueError("spawn window must satisfy 0 <= t_min <= t_max")
        if not self.candidates:
            raise ValueError("need at least one obstacle candidate position")


@dataclass(frozen=True)
class World:
    lane_boundaries: tuple[float, ...]
    touchpad: Rect
    ground_y: float
    spawn_rule: SpawnRule
    danger_zone: Rect
    start_position: tuple[float, float]
    bounds: Rect
    vehicle_radius: float = 0.2
    max_landing_speed: float = 2.5
    max_duration: float = 40.0


@dataclass(frozen=True)
class ActiveWorld:
    """World plus the per-trial obstacle schedule drawn at activation time."""

    config: World
    spawn_time: float
    obstacle: Rect
    spawned: bool = False


def activate_world(config: World, seed, dt: float) -> ActiveWorld:
    """Draw the trial's spawn schedule; the spawn instant snaps to the tick grid."""
    rng = np.random.default_rng(seed)
    rule = config.spawn_rule
    raw = rule.t_min + rng.random() * (rule.t_max - rule.t_min)
    spawn_time = round(raw / dt) * dt
    cx, cy = rule.candidates[rng.integers(len(rule.candidates))]
    obstacle = Rect(
        cx - rule.width / 2.0,
        cx + rule.width / 2.0,
        cy - rule.height / 2.0,
        cy + rule.height / 2.0,
    )
    return ActiveWorld(config=config, spawn_time=spawn_time, obstacle=obstacle)


def step_world(aw: ActiveWorld, state, t: float) -> tuple[list[str], ActiveWorld]:
    """Events for the current state/time; spawning updates the world value.

    Terminal events are mutually exclusive with precedence
    collided > landed > leftBounds; their absence means the trial continues.
    """
    events: list[str] = []
    cfg = aw.config
    if not aw.spawned and t >= aw.spawn_time - 1e-9:
        aw = replace(aw, spawned=True)
        events.append("obstacleSpawned")

    px, py, vy = float(state[0]), float(state[1]), float(state[4])
    r = cfg.vehicle_radius
    if aw.spawned and aw.obstacle.overlaps_circle(px, py, r):
        events.append("collided")
        return events, aw
    if py <= cfg.ground_y:
        on_pad = cfg.touchpad.x_min <= px <= cfg.touchpad.x_max
        gentle = abs(vy) <= cfg.max_landing_speed
        events.append("landed" if (on_pad and gentle) else "collided")
        return events, aw
    if not cfg.bounds.contains(px, py):
        events.append("leftBounds")
    return events, aw


TERMINAL_EVENTS = {"landed", "collided", "leftBounds"}


def outcome_of(events: set[str], timed_out: bool) -> str:
    if "landed" in events:
        return "landed"
    if "collided" in events:
        return "collided"
    return "aborted"  # leftBounds, timeout, or manual end


# ---------------------------------------------------------------------------
# synthetic pilot
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticPilot:
    """Ground-truth stochastic pilot used to generate training trials."""

    behavior: BehaviorModel
    descent_speed: float = 1.0
    thrust_gain: float = 3.0        # vertical-speed tracking, 1/s
    lateral_pos_gain: float = 0.6   # m/s^2 per m
    lateral_vel_gain: float = 1.2   # m/s^2 per m/s
    attitude_gain: float = 40.0     # 1/s^2
    attitude_rate_gain: float = 8.0 # 1/s
    max_tilt: float = 0.25          # rad


def pre_spawn_input(
    pilot: SyntheticPilot, state, x_target: float, params: PlantParams
) -> np.ndarray:
    """Lane-holding, constant-descent feedback law used before the spawn."""
    px, _, theta, vx, vy, w = [float(v) for v in state]
    thrust = params.mass * (
        -params.k1 * vy + pilot.thrust_gain * (-pilot.descent_speed - vy)
    )
    acc_des = pilot.lateral_pos_gain * (x_target - px) - pilot.lateral_vel_gain * vx
    theta_des = float(np.clip(acc_des / params.gravity, -pilot.max_tilt, pilot.max_tilt))
    alpha = params.inertia_x * (
        -params.k2 * theta
        - params.k3 * w
        + pilot.attitude_gain * (theta_des - theta)
        - pilot.attitude_rate_gain * w
    )
    return saturate_input(np.array([alpha, thrust]), params)


def generate_synthetic_trials(
    pilot: SyntheticPilot,
    world: World,
    n: int,
    seed: int,
    params: PlantParams | None = None,
) -> list[Trajectory]:
    """Simulate ``n`` independent trials, deterministically per seed.

    Trial ``i`` owns the RNG stream spawned from ``SeedSequence(seed, (i,))``
    for both its spawn schedule and its post-spawn input draws.
    """
    if n < 1:
        raise ValueError("need n >= 1 trials")
    params = params or PlantParams()
    pm = build_plant(params)
    return [
        _simulate_trial(pilot, world, pm, np.random.SeedSequence(seed, spawn_key=(i,)))
        for i in range(n)
    ]


def _simulate_trial(
    pilot: SyntheticPilot, world: World, pm: PlantModel, seed_seq
) -> Trajectory:
    rng = np.random.default_rng(np.random.Philox(seed_seq))
    aw = activate_world(world, rng, pm.dt)
    dt = pm.dt
    max_steps = int(world.max_duration / dt)

    x = np.zeros(6)
    x[0], x[1] = world.start_position
    x[4] = -pilot.descent_speed

    times, states, inputs = [], [], []
    seen: set[str] = set()
    timed_out = False
    for k in range(max_steps + 1):
        t = k * dt
        events, aw = step_world(aw, x, t)
        seen.update(events)
        u = _pilot_input(pilot, aw, x, t, pm.params, rng)
        times.append(t)
        states.append(x.copy())
        inputs.append(u)
        if TERMINAL_EVENTS & set(events):
            break
        if k == max_steps:
            timed_out = True
            break
        x = step(pm, x, u, saturate=True)

    return Trajectory(
        t=np.array(times),
        states=np.array(states),
        inputs=np.array(inputs),
        spawn_time=aw.spawn_time if aw.spawned else times[-1],
        outcome=outcome_of(seen, timed_out),
        dt=dt,
    )


def _pilot_input(
    pilot: SyntheticPilot,
    aw: ActiveWorld,
    x: np.ndarray,
    t: float,
    params: PlantParams,
    rng,
) -> np.ndarray:
    if not aw.spawned:
        return pre_spawn_input(pilot, x, aw.config.start_position[0], params)
    dist = condition_on_time(pilot.behavior, t - aw.spawn_time)
    u = dist.mixture.sample(1, rng)[0]
    return saturate_input(u, params)


# ---------------------------------------------------------------------------
# defaults
# ---------------------------------------------------------------------------

def default_world() -> World:
    return World(
        lane_boundaries=(-4.5, -1.5, 1.5, 4.5),
        touchpad=Rect(-3.5, 3.5, -0.2, 0.0),
        ground_y=0.0,
        spawn_rule=SpawnRule(
            t_min=1.6,
            t_max=2.4,
            candidates=((-0.3, 3.0), (-0.7, 3.2), (-0.5, 2.6)),
            width=1.0,
            height=1.0,
        ),
        danger_zone=Rect(-4.5, 4.5, 0.0, 1.0),
        start_position=(0.0, 8.0),
        bounds=Rect(-9.0, 9.0, -1.0, 20.0),
    )


def default_pilot_model() -> BehaviorModel:
    """Hand-built three-phase evasive maneuver over [t, alpha, thrust].

    Phase 1 brakes the descent and starts a rightward lane shift, phase 2
    counter-tilts and resumes the descent, phase 3 levels off and settles
    into a slow descent.  Time components tile the 4.5 s window in thirds;
    cross-covariances encode the within-phase input trend, so the Schur
    complement (per-step input noise) is exactly the chosen diagonal.
    """
    sig_t = 0.35
    noise = np.array([0.004, 0.05])  # conditional per-step noise (alpha, thrust)

    def comp(mu_t, mu_u, slope):
        mu_u = np.asarray(mu_u)
        slope = np.asarray(slope)
        var_t = sig_t**2
        cov = np.zeros((3, 3))
        cov[0, 0] = var_t
        cov[0, 1:] = slope * var_t
        cov[1:, 0] = slope * var_t
        cov[1:, 1:] = np.diag(noise**2) + np.outer(slope, slope) * var_t
        return GaussianComponent(1.0 / 3.0, np.array([mu_t, *mu_u]), cov)

    joint = Mixture(
        (
            comp(0.75, [0.004, 0.1135], [-0.0648, -0.6733]),
            comp(2.25, [-0.0135, -0.2147], [0.0415, 0.2357]),
            comp(3.75, [0.0088, -0.0364], [-0.0117, 0.0019]),
        )
    )
    return split_blocks(joint)


def default_pilot() -> SyntheticPilot:
    return SyntheticPilot(behavior=default_pilot_model())


def default_initial_belief(center=None) -> Belief:
    """Three-component initial uncertainty around a nominal spawn state."""
    x0 = np.zeros(6) if center is None else np.asarray(center, dtype=float)
    offsets = np.array(
        [
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.1, 1.0, 1.0, 0.05],
            [-1.0, 1.0, -0.1, -1.0, -1.0, -0.05],
        ]
    )
    cov = np.diag([1.5, 1.5, 0.05, 1.0, 2.0, 0.05])
    comps = tuple(
        GaussianComponent(1.0 / 3.0, x0 + off, cov) for off in offsets
    )
    return Belief(mixture=Mixture(comps), time=0.0, step_index=0)


DEFAULT_PREDICTION_START = (0.0, 6.0, 0.0, 0.0, -1.0, 0.0)


# ---------------------------------------------------------------------------
# world JSON
# ---------------------------------------------------------------------------

def world_to_json(world: World) -> dict:
    return {
        "laneBoundaries": list(world.lane_boundaries),
        "touchpad": world.touchpad.as_list(),
        "groundY": world.ground_y,
        "spawnRule": {
            "tMin": world.spawn_rule.t_min,
            "tMax": world.spawn_rule.t_max,
            "candidates": [list(c) for c in world.spawn_rule.candidates],
            "width": world.spawn_rule.width,
            "height": world.spawn_rule.height,
        },
        "dangerZone": world.danger_zone.as_list(),
        "startPosition": list(world.start_position),
        "bounds": world.bounds.as_list(),
        "vehicleRadius": world.vehicle_radius,
        "maxLandingSpeed": world.max_landing_speed,
        "maxDuration": world.max_duration,
    }


def world_from_json(obj: dict) -> World:
    return World(
        lane_boundaries=tuple(obj["laneBoundaries"]),
        touchpad=Rect(*obj["touchpad"]),
        ground_y=float(obj["groundY"]),
        spawn_rule=SpawnRule(
            t_min=float(obj["spawnRule"]["tMin"]),
            t_max=float(obj["spawnRule"]["tMax"]),
            candidates=tuple(tuple(c) for c in obj["spawnRule"]["candidates"]),
            width=float(obj["spawnRule"]["width"]),
            height=float(obj["spawnRule"]["height"]),
        ),
        danger_zone=Rect(*obj["dangerZone"]),
        start_position=tuple(obj["startPosition"]),
        bounds=Rect(*obj["bounds"]),
        vehicle_radius=float(obj.get("vehicleRadius", 0.2)),
        max_landing_speed=float(obj.get("maxLandingSpeed", 2.5)),
        max_duration=float(obj.get("maxDuration", 40.0)),
    )


def load_world(path) -> World:
    return world_from_json(json.loads(Path(path).read_text()))


def save_world(world: World, path) -> None:
    Path(path).write_text(json.dumps(world_to_json(world), indent=2, sort_keys=True))
