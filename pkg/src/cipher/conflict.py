"""Sampled inter-robot conflict detection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .decomposition import CellId, Decomposition
from .geometry import Configuration, RobotModel
from .trajectory import Trajectory, time_grid

DT_CHECK = 0.05
SEGMENT_LEN = 1.0


@dataclass(frozen=True)
class Conflict:
    robot_a: int
    robot_b: int
    t: float
    pos_a: Configuration
    pos_b: Configuration
    cell: CellId | None = None

    def __post_init__(self):
        if not self.robot_a < self.robot_b:
            raise ValueError("robot_a must be < robot_b")
        if self.t < 0:
            raise ValueError("t must be >= 0")

    def to_dict(self) -> dict:
        return {
            "robots": [self.robot_a, self.robot_b],
            "t": self.t,
            "pos_a": self.pos_a.to_list(),
            "pos_b": self.pos_b.to_list(),
            "cell": None if self.cell is None else [list(p) for p in self.cell],
        }


def state_at(traj: Trajectory, t: float) -> Configuration:
    return traj.state_at(t)


def positions_on_grid(trajs: Sequence[Trajectory], ts: np.ndarray, segment_len: float, dt_check: float) -> np.ndarray:
    """``(n, len(ts), 2)`` positions, evaluated one fixed-duration segment at a time."""
    per = max(1, int(round(segment_len / dt_check)))
    pos = np.empty((len(trajs), len(ts), 2))
    for lo in range(0, len(ts), per):
        chunk = ts[lo : lo + per]
        for i, tr in enumerate(trajs):
            pos[i, lo : lo + len(chunk)] = tr.positions_at(chunk)
    return pos


def detect_conflicts(
    trajs: Sequence[Trajectory],
    robots: Sequence[RobotModel],
    dt_check: float = DT_CHECK,
    segment_len: float = SEGMENT_LEN,
    *,
    involving: Iterable[int] | None = None,
    decomposition: Decomposition | None = None,
) -> list[Conflict]:
    """All first-contact events ``distance < r_a + r_b`` at times ``k * dt_check``.

    Conflicts are ordered by time, then robot pair. ``involving`` restricts
    the check to pairs containing at least one of the given robots.
    ``decomposition`` fills in each conflict's cell (projection of the
    midpoint of the two positions).
    """
    if not dt_check > 0:
        raise ValueError("dt_check must be positive")
    ratio = segment_len / dt_check
    if not segment_len > 0 or abs(ratio - round(ratio)) > 1e-6:
        raise ValueError("segment_len must be a positive multiple of dt_check")
    n = len(trajs)
    if n < 2:
        return []
    horizon = max(t.duration for t in trajs)
    ts = time_grid(horizon, dt_check)
    pos = positions_on_grid(trajs, ts, segment_len, dt_check)
    radii = np.array([r.radius for r in robots], dtype=float)
    if involving is None:
        events = kernels.first_contacts(pos, radii)
        pairs = [(int(a), int(b), int(k)) for a, b, k in events]
    else:
        keep = sorted(set(involving))
        pairs = []
        for a in keep:
            others = [b for b in range(n) if b != a and not (b in keep and b < a)]
            for b in others:
                sub = np.ascontiguousarray(pos[[a, b]])
                for _, _, k in kernels.first_contacts(sub, radii[[a, b]]):
                    pairs.append((min(a, b), max(a, b), int(k)))
    out = []
    for a, b, k in sorted(set(pairs), key=lambda e: (e[2], e[0], e[1])):
        t = float(ts[k])
        pa = trajs[a].state_at(t)
        pb = trajs[b].state_at(t)
        cell = None
        if decomposition is not None:
            cell = decomposition.project(((pa.x + pb.x) / 2.0, (pa.y + pb.y) / 2.0))
        out.append(Conflict(a, b, t, pa, pb, cell))
    return out
