"""Problem instance and plan result records."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .geometry import Configuration, Environment, RobotModel, as_config, disc_free
from .trajectory import Trajectory

RESULT_SCHEMA = "cipher.result/1"


class InfeasibleInput(ValueError):
    """Starts or goals violate the problem invariants."""


@dataclass(frozen=True)
class Problem:
    env: Environment
    robots: tuple[RobotModel, ...]
    starts: tuple[Configuration, ...]
    goals: tuple[Configuration, ...]
    time_limit: float = 60.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "robots", tuple(self.robots))
        object.__setattr__(self, "starts", tuple(as_config(s) for s in self.starts))
        object.__setattr__(self, "goals", tuple(as_config(g) for g in self.goals))
        if not self.robots:
            raise ValueError("need at least one robot")
        if not (len(self.robots) == len(self.starts) == len(self.goals)):
            raise ValueError("robots, starts and goals differ in length")
        if len({r.kind for r in self.robots}) != 1:
            raise ValueError("all robots must share one kind")

    @property
    def n(self) -> int:
        return len(self.robots)

    @property
    def kinodynamic(self) -> bool:
        return self.robots[0].kinodynamic

    def check(self) -> None:
        """Raise :class:`InfeasibleInput` unless starts/goals are free and pairwise separated."""
        for label, confs in (("start", self.starts), ("goal", self.goals)):
            for i, (c, r) in enumerate(zip(confs, self.robots)):
                if not disc_free(self.env, c, r.radius):
                    raise InfeasibleInput(f"{label} of robot {i} is in collision")
                if self.kinodynamic and c.theta is None and label == "start":
                    raise InfeasibleInput(f"start of robot {i} needs a heading")
            for i in range(self.n):
                for j in range(i + 1, self.n):
                    lim = self.robots[i].radius + self.robots[j].radius
                    dx = confs[i].x - confs[j].x
                    dy = confs[i].y - confs[j].y
                    if dx * dx + dy * dy < lim * lim:
                        raise InfeasibleInput(f"{label}s of robots {i} and {j} overlap")

    def with_limit(self, time_limit: float) -> "Problem":
        return Problem(self.env, self.robots, self.starts, self.goals, time_limit, self.seed)


@dataclass
class PlanResult:
    status: str  # success | failure | timeout
    planner: str
    trajectories: list[Trajectory] = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    seed: int = 0
    config: dict = field(default_factory=dict)
    conflicts: list = field(default_factory=list)
    events: list = field(default_factory=list)
    decomposition: dict | None = None

    @property
    def success(self) -> bool:
        return self.status == "success"

    def to_dict(self) -> dict:
        """Deterministic part of the result; wall-clock timings live in :attr:`timing`."""
        return {
            "schema": RESULT_SCHEMA,
            "status": self.status,
            "planner": self.planner,
            "seed": self.seed,
            "config": self.config,
            "stats": self.stats,
            "trajectories": [t.to_dict() for t in self.trajectories],
            "conflicts": self.conflicts,
            "events": self.events,
            "decomposition": self.decomposition,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PlanResult":
        if data.get("schema") != RESULT_SCHEMA:
            raise ValueError(f"unsupported result schema {data.get('schema')!r}")
        return cls(
            status=data["status"],
            planner=data["planner"],
            trajectories=[Trajectory.from_dict(t) for t in data["trajectories"]],
            stats=data.get("stats", {}),
            seed=data.get("seed", 0),
            config=data.get("config", {}),
            conflicts=data.get("conflicts", []),
            events=data.get("events", []),
            decomposition=data.get("decomposition"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path: str | Path, timing_sidecar: bool = True) -> None:
        path = Path(path)
        path.write_text(self.dumps())
        if timing_sidecar:
            path.with_name(path.name + ".timing.json").write_text(
                json.dumps(self.timing, indent=1, sort_keys=True) + "\n"
            )

    @classmethod
    def load(cls, path: str | Path) -> "PlanResult":
        return cls.from_dict(json.loads(Path(path).read_text()))


def problem_from_lists(env: Environment, robot: RobotModel, starts: Sequence, goals: Sequence, **kw) -> Problem:
    return Problem(env, (robot,) * len(starts), tuple(starts), tuple(goals), **kw)
