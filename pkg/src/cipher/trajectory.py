"""Time-parameterized robot motions.

Both kinds answer :meth:`states_at` for any non-negative time; after the end
of the trajectory the robot stays at its final state.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import kernels
from .geometry import Configuration, wrap_angle

TRAJ_SCHEMA = "cipher.trajectory/1"


def propagate_unicycle(state, control: tuple[float, float], dt: float, substeps: int) -> list[Configuration]:
    """RK4-integrate the unicycle for ``dt`` with ``substeps`` equal steps.

    Returns ``substeps + 1`` states including both endpoints; headings are
    normalized to (-pi, pi].
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    x, y, th = float(state[0]), float(state[1]), float(state[2])
    v, w = control
    out = kernels.rk4_unicycle(x, y, th, np.array([float(v)]), np.array([float(w)]), dt / substeps, int(substeps))[0]
    return [Configuration(*row) for row in out]


def integrate_unicycle(state, control, dt: float, substeps: int) -> np.ndarray:
    """Like :func:`propagate_unicycle` but returns the raw ``(substeps+1, 3)``
    array with the heading left unwrapped."""
    v, w = control
    return kernels.rk4_unicycle(
        float(state[0]), float(state[1]), float(state[2]),
        np.array([float(v)]), np.array([float(w)]), dt / substeps, int(substeps),
    )[0]


MIN_LEG = 1e-9


def distinct_rows(pos: np.ndarray) -> list[int]:
    """Indices of ``pos`` (``(k, n, 2)``) after merging moves shorter than
    :data:`MIN_LEG`; the last row is always kept so the path ends exactly."""
    keep = [0]
    for k in range(1, len(pos)):
        if np.hypot(*(pos[k] - pos[keep[-1]]).T).max() > MIN_LEG:
            keep.append(k)
    if len(pos) > 1 and keep[-1] != len(pos) - 1:
        if len(keep) > 1:
            keep[-1] = len(pos) - 1
        elif np.any(pos[-1] != pos[0]):
            keep.append(len(pos) - 1)
    return keep


class Trajectory:
    robot: int
    kind: str

    @property
    def duration(self) -> float:
        raise NotImplementedError

    def states_at(self, ts) -> np.ndarray:
        raise NotImplementedError

    def positions_at(self, ts) -> np.ndarray:
        return self.states_at(ts)[:, :2]

    def state_at(self, t: float) -> Configuration:
        if t < 0:
            raise ValueError("t must be >= 0")
        return Configuration(*self.states_at(np.array([float(t)]))[0])

    @property
    def start(self) -> Configuration:
        return self.state_at(0.0)

    @property
    def end(self) -> Configuration:
        return self.state_at(self.duration)

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(data: dict) -> "Trajectory":
        kind = data["kind"]
        if kind == "geometric":
            return GeometricTrajectory.from_dict(data)
        if kind == "kinodynamic":
            return KinodynamicTrajectory.from_dict(data)
        raise ValueError(f"unknown trajectory kind {kind!r}")

    def __eq__(self, other) -> bool:
        return isinstance(other, Trajectory) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))


class GeometricTrajectory(Trajectory):
    """Piecewise-linear motion through timestamped waypoints."""

    kind = "geometric"

    def __init__(self, robot: int, times: Sequence[float], points):
        times = np.asarray(times, dtype=float)
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if times.ndim != 1 or len(times) != len(points) or len(times) == 0:
            raise ValueError("need one timestamp per waypoint")
        if times[0] != 0.0:
            raise ValueError("waypoint times must start at 0")
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("waypoint times must be strictly increasing")
        self.robot = int(robot)
        self.times = times
        self.points = points

    @classmethod
    def constant_speed(cls, robot: int, points, speed: float = 1.0) -> "GeometricTrajectory":
        """Timestamp a polyline at constant ``speed``; zero-length legs are dropped."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        pts = pts[distinct_rows(pts.reshape(len(pts), 1, 2))]
        seg = np.hypot(*np.diff(pts, axis=0).T) if len(pts) > 1 else np.zeros(0)
        times = np.concatenate(([0.0], np.cumsum(seg / speed)))
        return cls(robot, times, pts)

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def states_at(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.empty((len(ts), 2))
        out[:, 0] = np.interp(ts, self.times, self.points[:, 0])
        out[:, 1] = np.interp(ts, self.times, self.points[:, 1])
        return out

    def length(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return float(np.hypot(*np.diff(self.points, axis=0).T).sum())

    def to_dict(self) -> dict:
        return {
            "schema": TRAJ_SCHEMA,
            "kind": self.kind,
            "robot": self.robot,
            "times": self.times.tolist(),
            "points": self.points.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeometricTrajectory":
        return cls(data["robot"], data["times"], data["points"])

    def __repr__(self) -> str:
        return f"GeometricTrajectory(robot={self.robot}, waypoints={len(self.times)}, T={self.duration:.3f})"


class KinodynamicTrajectory(Trajectory):
    """Unicycle motion: initial state plus a chain of ``(v, omega, duration)``.

    Segment boundary states are obtained by replaying each control with the
    same fixed-step RK4 used for intermediate queries, so ``state_at`` is
    continuous and reproducible from the serialized form alone.
    """

    kind = "kinodynamic"

    def __init__(self, robot: int, start, controls, substep: float):
        start = np.asarray(start, dtype=float)
        if start.shape != (3,):
            raise ValueError("start must be (x, y, theta)")
        controls = np.asarray(controls, dtype=float).reshape(-1, 3)
        if len(controls) and not np.all(controls[:, 2] > 0):
            raise ValueError("control durations must be positive")
        if not substep > 0:
            raise ValueError("substep must be positive")
        self.robot = int(robot)
        self.start_state = start
        self.controls = controls
        self.substep = float(substep)
        cum = [0.0]
        for d in controls[:, 2]:
            cum.append(cum[-1] + float(d))
        self.cum = np.array(cum)
        states = np.empty((len(controls) + 1, 3))
        states[0] = start
        ctrl = np.ascontiguousarray(controls[:, :2]) if len(controls) else np.zeros((0, 2))
        for i in range(len(controls)):
            states[i + 1] = kernels.unicycle_eval(
                states, ctrl, np.array([i], dtype=np.int64), np.array([controls[i, 2]]), self.substep
            )[0]
        self.seg_states = states
        self._ctrl = ctrl

    @property
    def duration(self) -> float:
        return float(self.cum[-1])

    def states_at(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.empty((len(ts), 3))
        done = ts >= self.cum[-1]
        out[done] = self.seg_states[-1]
        live = ~done
        if live.any():
            tl = np.maximum(ts[live], 0.0)
            idx = np.searchsorted(self.cum, tl, side="right") - 1
            idx = np.clip(idx, 0, len(self.controls) - 1).astype(np.int64)
            taus = tl - self.cum[idx]
            out[live] = kernels.unicycle_eval(self.seg_states, self._ctrl, idx, taus, self.substep)
        return out

    def to_dict(self) -> dict:
        return {
            "schema": TRAJ_SCHEMA,
            "kind": self.kind,
            "robot": self.robot,
            "start": self.start_state.tolist(),
            "controls": self.controls.tolist(),
            "substep": self.substep,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KinodynamicTrajectory":
        return cls(data["robot"], data["start"], data["controls"], data["substep"])

    def __repr__(self) -> str:
        return f"KinodynamicTrajectory(robot={self.robot}, segments={len(self.controls)}, T={self.duration:.3f})"


def relabel(traj: Trajectory, robot: int) -> Trajectory:
    if isinstance(traj, GeometricTrajectory):
        return GeometricTrajectory(robot, traj.times, traj.points)
    return KinodynamicTrajectory(robot, traj.start_state, traj.controls, traj.substep)


def time_grid(horizon: float, dt: float) -> np.ndarray:
    """``k * dt`` for ``k = 0 .. ceil(horizon / dt)``."""
    k = int(np.ceil(horizon / dt - 1e-9)) if horizon > 0 else 0
    return np.arange(k + 1) * dt


def heading_of(cfg: Configuration) -> float:
    return 0.0 if cfg.theta is None else wrap_angle(cfg.theta)
