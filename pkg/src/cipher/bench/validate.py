"""Independent validity oracle for plan results.

Only ``Trajectory.states_at`` is shared with the planners; obstacle and pair
distances are recomputed here with plain numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import angle_diff
from ..problem import PlanResult, Problem

ENDPOINT_TOL = 1e-6


@dataclass(frozen=True)
class Violation:
    kind: str  # start | goal | static | pair | shape
    robots: tuple[int, ...]
    t: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "robots": list(self.robots), "t": self.t, "detail": self.detail}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    checked_times: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def pairs(self) -> set[tuple[int, int]]:
        return {v.robots for v in self.violations if v.kind == "pair"}

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checked_times": self.checked_times,
                "violations": [v.to_dict() for v in self.violations]}


def _intervals(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as ``(first, last)`` index pairs."""
    if not mask.any():
        return []
    m = np.concatenate(([False], mask, [False])).astype(np.int8)
    d = np.diff(m)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def _rect_dist2(x: np.ndarray, y: np.ndarray, rect) -> np.ndarray:
    dx = np.maximum(np.maximum(rect[0] - x, x - rect[2]), 0.0)
    dy = np.maximum(np.maximum(rect[1] - y, y - rect[3]), 0.0)
    return dx * dx + dy * dy


def goal_tolerance(p: Problem, result: PlanResult) -> tuple[float, float | None]:
    """Position and heading tolerances implied by the robot model and config."""
    if not p.kinodynamic:
        return ENDPOINT_TOL, None
    guidance = (result.config or {}).get("guidance", {})
    return float(guidance.get("goal_tolerance", 0.5)) + 1e-9, guidance.get("heading_tolerance")


def validate(result: PlanResult, p: Problem, dt: float = 0.05) -> ValidationReport:
    """Re-check endpoints, static clearance and pairwise separation every ``dt``.

    Each violation run (consecutive sample times) is reported once, at its
    first time. Robots stay at their final state after their trajectory ends.
    """
    rep = ValidationReport()
    trajs = result.trajectories
    if len(trajs) != p.n:
        rep.violations.append(Violation("shape", (), 0.0, f"{len(trajs)} trajectories for {p.n} robots"))
        return rep
    horizon = max(t.duration for t in trajs)
    k = int(math.ceil(horizon / dt - 1e-9))
    ts = np.arange(k + 1) * dt
    ts[-1] = horizon  # last sample exactly at the end
    rep.checked_times = len(ts)
    pos_tol, head_tol = goal_tolerance(p, result)

    states = []
    for i, tr in enumerate(trajs):
        st = np.asarray(tr.states_at(ts), dtype=float)
        states.append(st)
        s0 = np.asarray(tr.states_at([0.0]), dtype=float)[0]
        sT = np.asarray(tr.states_at([tr.duration]), dtype=float)[0]
        start, goal = p.starts[i], p.goals[i]
        if math.hypot(s0[0] - start.x, s0[1] - start.y) > ENDPOINT_TOL:
            rep.violations.append(Violation("start", (i,), 0.0, f"starts at {s0[:2].tolist()}"))
        if p.kinodynamic and start.theta is not None and abs(angle_diff(s0[2], start.theta)) > ENDPOINT_TOL:
            rep.violations.append(Violation("start", (i,), 0.0, "start heading"))
        err = math.hypot(sT[0] - goal.x, sT[1] - goal.y)
        if err > pos_tol:
            rep.violations.append(Violation("goal", (i,), tr.duration, f"ends {err:.4g} from goal"))
        if head_tol is not None and goal.theta is not None and abs(angle_diff(sT[2], goal.theta)) > head_tol:
            rep.violations.append(Violation("goal", (i,), tr.duration, "goal heading"))

    b = p.env.bounds
    for i, st in enumerate(states):
        r = p.robots[i].radius
        x, y = st[:, 0], st[:, 1]
        bad = (x - r <= b[0]) | (x + r >= b[2]) | (y - r <= b[1]) | (y + r >= b[3])
        for rect in p.env.obstacles:
            bad |= _rect_dist2(x, y, rect) <= r * r
        for first, _ in _intervals(bad):
            rep.violations.append(Violation("static", (i,), float(ts[first]), f"at {st[first, :2].tolist()}"))

    for a in range(p.n):
        for c in range(a + 1, p.n):
            need = p.robots[a].radius + p.robots[c].radius
            d = np.hypot(states[a][:, 0] - states[c][:, 0], states[a][:, 1] - states[c][:, 1])
            for first, _ in _intervals(d < need):
                rep.violations.append(Violation("pair", (a, c), float(ts[first]), f"distance {d[first]:.4g}"))
    rep.violations.sort(key=lambda v: (v.t, v.kind, v.robots))
    return rep
