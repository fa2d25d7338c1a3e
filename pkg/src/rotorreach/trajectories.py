"""Piloting-trial records: file format and training-window extraction.

A trial is stored as a CSV of uniformly sampled rows
``t,px,py,theta,vx,vy,w,alpha,thrust`` next to a JSON sidecar carrying
``{spawnTime, outcome, dt}``.  Numeric fields are written with 17
significant digits so a save/load round trip is bit exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Trajectory",
    "TrainingWindow",
    "TrajectoryError",
    "HeaderError",
    "NonMonotonicTimeError",
    "NonUniformTimeError",
    "NanFieldError",
    "WindowError",
    "extract_window",
    "load_trajectory",
    "save_trajectory",
    "list_trials",
    "trial_paths",
]

CSV_HEADER = "t,px,py,theta,vx,vy,w,alpha,thrust"
OUTCOMES = ("landed", "collided", "aborted")
TIME_TOL = 1e-9


class TrajectoryError(ValueError):
    """Base class for trajectory data problems."""


class HeaderError(TrajectoryError):
    """Missing or malformed CSV header / sidecar."""


class NonMonotonicTimeError(TrajectoryError):
    """Timestamps are not strictly increasing."""


class NonUniformTimeError(TrajectoryError):
    """Timestamp spacing deviates from the declared dt."""


class NanFieldError(TrajectoryError):
    """A numeric field is NaN or infinite."""


class WindowError(TrajectoryError):
    """Trial unusable for training-window extraction."""


@dataclass(frozen=True)
class Trajectory:
    """One piloting trial: uniformly timed states and applied inputs."""

    t: np.ndarray          # (n,)
    states: np.ndarray     # (n, 6)
    inputs: np.ndarray     # (n, 2)
    spawn_time: float
    outcome: str
    dt: float

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        states = np.asarray(self.states, dtype=float)
        inputs = np.asarray(self.inputs, dtype=float)
        n = t.shape[0]
        if n == 0:
            raise TrajectoryError("trajectory has no samples")
        if states.shape != (n, 6) or inputs.shape != (n, 2):
            raise TrajectoryError(
                f"shape mismatch: t {t.shape}, states {states.shape}, inputs {inputs.shape}"
            )
        if not (np.isfinite(t).all() and np.isfinite(states).all() and np.isfinite(inputs).all()):
            raise NanFieldError("trajectory contains NaN or infinite fields")
        if n > 1:
            gaps = np.diff(t)
            if np.any(gaps <= 0.0):
                raise NonMonotonicTimeError("non-monotonic time")
            if np.abs(gaps - self.dt).max() > TIME_TOL:
                raise NonUniformTimeError(
                    f"time spacing deviates from dt={self.dt} by "
                    f"{np.abs(gaps - self.dt).max():.3e}"
                )
        if self.outcome not in OUTCOMES:
            raise TrajectoryError(f"unknown outcome {self.outcome!r}")
        if np.abs(t - self.spawn_time).min() > TIME_TOL:
            raise TrajectoryError(
                f"spawn time {self.spawn_time} does not coincide with a sample timestamp"
            )
        for name, arr in (("t", t), ("states", states), ("inputs", inputs)):
            arr.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])


@dataclass(frozen=True)
class TrainingWindow:
    """Post-spawn rows [t - t_spawn, alpha, thrust] feeding the EM fit."""

    rows: np.ndarray       # (k, 3)
    duration: float

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 3:
            raise TrajectoryError(f"window rows must be (k, 3), got {rows.shape}")
        if rows.shape[0] == 0:
            raise TrajectoryError("empty training window")
        if rows[:, 0].min() < -TIME_TOL or rows[:, 0].max() > self.duration + TIME_TOL:
            raise TrajectoryError("window times fall outside [0, duration]")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    def __len__(self) -> int:
        return self.rows.shape[0]


def extract_window(traj: Trajectory, duration: float) -> TrainingWindow:
    """Rows from spawn to spawn+duration, time re-based to zero at spawn.

    Only successfully landed trials are usable; the trial must extend at
    least ``duration`` past the spawn instant.  The row count is always
    floor(duration/dt) + 1.
    """
    if duration < 0.0:
        raise WindowError("window duration must be >= 0")
    if traj.outcome != "landed":
        raise WindowError(f"trial outcome is {traj.outcome!r}, need 'landed'")
    if traj.t[-1] < traj.spawn_time + duration - TIME_TOL:
        raise WindowError(
            f"trial ends {traj.t[-1]:.3f}s, too short for a {duration}s window "
            f"after spawn at {traj.spawn_time:.3f}s"
        )
    mask = (traj.t >= traj.spawn_time - TIME_TOL) & (
        traj.t <= traj.spawn_time + duration + TIME_TOL
    )
    rows = np.column_stack([traj.t[mask] - traj.spawn_time, traj.inputs[mask]])
    return TrainingWindow(rows=rows, duration=duration)


def stack_windows(windows) -> np.ndarray:
    """Concatenate training windows into one (N, 3) EM data matrix."""
    return np.vstack([w.rows for w in windows])


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def save_trajectory(traj: Trajectory, csv_path) -> Path:
    """Write the CSV and its JSON sidecar; returns the CSV path."""
    csv_path = Path(csv_path)
    lines = [CSV_HEADER]
    for i in range(len(traj)):
        fields = [traj.t[i], *traj.states[i], *traj.inputs[i]]
        lines.append(",".join(f"{v:.17g}" for v in fields))
    csv_path.write_text("\n".join(lines) + "\n")
    sidecar = {
        "spawnTime": traj.spawn_time,
        "outcome": traj.outcome,
        "dt": traj.dt,
    }
    _sidecar_path(csv_path).write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return csv_path


def _sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".json")


def load_trajectory(csv_path) -> Trajectory:
    csv_path = Path(csv_path)
    text = csv_path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != CSV_HEADER:
        raise HeaderError(
            f"{csv_path.name}: expected header {CSV_HEADER!r}, "
            f"got {lines[0].strip()!r}" if lines else f"{csv_path.name}: empty file"
        )
    rows = []
    for ln_no, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 9:
            raise HeaderError(f"{csv_path.name}:{ln_no}: expected 9 fields, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise HeaderError(f"{csv_path.name}:{ln_no}: {exc}") from exc
    data = np.asarray(rows, dtype=float)
    if data.size == 0:
        raise HeaderError(f"{csv_path.name}: no data rows")
    if not np.isfinite(data).all():
        raise NanFieldError(f"{csv_path.name}: NaN or infinite field")

    side_path = _sidecar_path(csv_path)
    if not side_path.exists():
        raise HeaderError(f"missing sidecar {side_path.name}")
    try:
        side = json.loads(side_path.read_text())
        spawn_time = float(side["spawnTime"])
        outcome = str(side["outcome"])
        dt = float(side["dt"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise HeaderError(f"malformed sidecar {side_path.name}: {exc}") from exc

    t = data[:, 0]
    if t.shape[0] > 1 and np.any(np.diff(t) <= 0.0):
        raise NonMonotonicTimeError(f"{csv_path.name}: non-monotonic time")
    return Trajectory(
        t=t,
        states=data[:, 1:7],
        inputs=data[:, 7:9],
        spawn_time=spawn_time,
        outcome=outcome,
        dt=dt,
    )


def trial_paths(trials_dir) -> list[Path]:
    """Trial CSVs in a directory, sorted by name (trial_NNN.csv layout)."""
    return sorted(Path(trials_dir).glob("trial_*.csv"))


def list_trials(trials_dir) -> list[Trajectory]:
    return [load_trajectory(p) for p in trial_paths(trials_dir)]


def next_trial_path(trials_dir) -> Path:
    """First unused trial_NNN.csv slot in the directory."""
    trials_dir = Path(trials_dir)
    trials_dir.mkdir(parents=True, exist_ok=True)
    existing = {p.name for p in trials_dir.glob("trial_*.csv")}
    n = 0
    while f"trial_{n:03d}.csv" in existing:
        n += 1
    return trials_dir / f"trial_{n:03d}.csv"


def window_row_count(duration: float, dt: float) -> int:
    return int(math.floor(duration / dt + TIME_TOL)) + 1
