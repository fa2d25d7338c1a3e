"""Discrete linear planar multi-rotor model with input saturation.

State ordering: [p_x, p_y, theta_att, v_x, v_y, w]; inputs [alpha, thrust].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

__all__ = [
    "PlantParams",
    "PlantModel",
    "build_plant",
    "step",
    "rollout",
    "saturate_input",
    "STATE_LABELS",
    "INPUT_LABELS",
]

STATE_LABELS = ("px", "py", "theta", "vx", "vy", "w")
INPUT_LABELS = ("alpha", "thrust")


@dataclass(frozen=True)
class PlantParams:
    """Physical and controller parameters; defaults are the simulation set."""

    dt: float = 0.04
    gravity: float = 9.8
    mass: float = 0.25
    inertia_x: float = 0.01
    k1: float = -0.1
    k2: float = -1.0
    k3: float = -30.0
    alpha_bounds: tuple[float, float] = (-0.5, 0.5)
    thrust_bounds: tuple[float, float] = (-1.7, 1.7)

    def __post_init__(self):
        if self.dt < 0.0:
            raise ValueError("dt must be >= 0")
        if self.mass <= 0.0 or self.inertia_x <= 0.0:
            raise ValueError("mass and inertia_x must be > 0")
        for lo, hi in (self.alpha_bounds, self.thrust_bounds):
            if not lo <= hi:
                raise ValueError(f"input bounds [{lo}, {hi}] are not ordered")


@dataclass(frozen=True)
class PlantModel:
    a: np.ndarray
    b: np.ndarray
    params: PlantParams

    @property
    def dt(self) -> float:
        return self.params.dt


def build_plant(params: PlantParams | None = None) -> PlantModel:
    """Assemble the discrete transition pair (A, B) from the parameters."""
    p = params or PlantParams()
    rate = np.zeros((6, 6))
    rate[0, 3] = 1.0
    rate[1, 4] = 1.0
    rate[2, 5] = 1.0
    rate[3, 2] = p.gravity
    rate[4, 4] = p.k1
    rate[5, 2] = p.k2
    rate[5, 5] = p.k3
    a = np.eye(6) + rate * p.dt
    b = np.zeros((6, 2))
    b[4, 1] = 1.0 / p.mass
    b[5, 0] = 1.0 / p.inertia_x
    b = b * p.dt
    a.setflags(write=False)
    b.setflags(write=False)
    return PlantModel(a=a, b=b, params=p)


def saturate_input(u, params: PlantParams) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    lo = np.array([params.alpha_bounds[0], params.thrust_bounds[0]])
    hi = np.array([params.alpha_bounds[1], params.thrust_bounds[1]])
    return np.clip(u, lo, hi)


def step(pm: PlantModel, x, u, saturate: bool = False) -> np.ndarray:
    """One transition x' = A x + B u; clamps u to the input bounds if asked."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (6,) or u.shape != (2,):
        raise ValueError(f"expected state (6,) and input (2,), got {x.shape}, {u.shape}")
    if not (np.isfinite(x).all() and np.isfinite(u).all()):
        raise ValueError("non-finite state or input")
    if saturate:
        u = saturate_input(u, pm.params)
    return pm.a @ x + pm.b @ u


def rollout(pm: PlantModel, x0, inputs, saturate: bool = False) -> np.ndarray:
    """Sequential stepping; returns (len(inputs)+1, 6) including the start state."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != 2:
        raise ValueError(f"inputs must be (n, 2), got {inputs.shape}")
    out = np.empty((inputs.shape[0] + 1, 6))
    out[0] = np.asarray(x0, dtype=float)
    for k, u in enumerate(inputs):
        out[k + 1] = step(pm, out[k], u, saturate=saturate)
    return out


def params_to_json(params: PlantParams) -> dict:
    d = asdict(params)
    d["alpha_bounds"] = list(params.alpha_bounds)
    d["thrust_bounds"] = list(params.thrust_bounds)
    return d


def params_from_json(obj: dict) -> PlantParams:
    kwargs = dict(obj)
    if "alpha_bounds" in kwargs:
        kwargs["alpha_bounds"] = tuple(kwargs["alpha_bounds"])
    if "thrust_bounds" in kwargs:
        kwargs["thrust_bounds"] = tuple(kwargs["thrust_bounds"])
    return PlantParams(**kwargs)


def load_params(path) -> PlantParams:
    return params_from_json(json.loads(Path(path).read_text()))


def save_params(params: PlantParams, path) -> None:
    Path(path).write_text(json.dumps(params_to_json(params), indent=2, sort_keys=True))
