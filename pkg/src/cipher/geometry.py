"""Workspace, obstacles, robot footprints and static collision predicates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels

Rect = tuple[float, float, float, float]

ENV_SCHEMA = "cipher.environment/1"


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    r = math.fmod(theta + math.pi, 2.0 * math.pi)
    if r <= 0.0:
        r += 2.0 * math.pi
    return r - math.pi


def angle_diff(a: float, b: float) -> float:
    """Absolute angular distance between two headings, in [0, pi]."""
    d = math.fmod(abs(a - b), 2.0 * math.pi)
    return 2.0 * math.pi - d if d > math.pi else d


@dataclass(frozen=True)
class Configuration:
    x: float
    y: float
    theta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if self.theta is not None:
            object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def as_array(self) -> np.ndarray:
        if self.theta is None:
            return np.array([self.x, self.y])
        return np.array([self.x, self.y, self.theta])

    def to_list(self) -> list[float]:
        return [self.x, self.y] if self.theta is None else [self.x, self.y, self.theta]

    @classmethod
    def from_seq(cls, seq: Sequence[float]) -> "Configuration":
        if len(seq) == 2:
            return cls(seq[0], seq[1])
        return cls(seq[0], seq[1], seq[2])


def as_config(p) -> Configuration:
    if isinstance(p, Configuration):
        return p
    return Configuration.from_seq(list(p))


def _check_rect(r: Sequence[float], what: str) -> Rect:
    if len(r) != 4:
        raise ValueError(f"{what} must have 4 entries, got {len(r)}")
    xmin, ymin, xmax, ymax = (float(v) for v in r)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"{what} {list(r)} has non-positive extent")
    return (xmin, ymin, xmax, ymax)


def rect_intersection(a: Rect, b: Rect) -> Rect | None:
    x0, y0 = max(a[0], b[0]), max(a[1], b[1])
    x1, y1 = min(a[2], b[2]), min(a[3], b[3])
    if x1 <= x0 or y1 <= y0:
        return None
    return (x0, y0, x1, y1)


def union_area(rects: Iterable[Rect]) -> float:
    """Exact area of a union of axis-aligned rectangles (coordinate compression)."""
    rects = [r for r in rects if r[2] > r[0] and r[3] > r[1]]
    if not rects:
        return 0.0
    xs = sorted({r[0] for r in rects} | {r[2] for r in rects})
    total = 0.0
    for x0, x1 in zip(xs[:-1], xs[1:]):
        spans = sorted((r[1], r[3]) for r in rects if r[0] <= x0 and r[2] >= x1)
        covered = 0.0
        cur_lo = cur_hi = None
        for lo, hi in spans:
            if cur_hi is None or lo > cur_hi:
                if cur_hi is not None:
                    covered += cur_hi - cur_lo
                cur_lo, cur_hi = lo, hi
            else:
                cur_hi = max(cur_hi, hi)
        if cur_hi is not None:
            covered += cur_hi - cur_lo
        total += covered * (x1 - x0)
    return total


@dataclass(frozen=True)
class Environment:
    """2D rectangular workspace with axis-aligned rectangular obstacles."""

    bounds: Rect
    obstacles: tuple[Rect, ...] = ()
    name: str = "env"

    def __post_init__(self):
        bounds = _check_rect(self.bounds, "bounds")
        obstacles = tuple(_check_rect(o, "obstacle") for o in self.obstacles)
        for o in obstacles:
            if rect_intersection(o, bounds) is None:
                raise ValueError(f"obstacle {list(o)} does not intersect bounds")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "obstacles", obstacles)

    @property
    def width(self) -> float:
        return self.bounds[2] - self.bounds[0]

    @property
    def height(self) -> float:
        return self.bounds[3] - self.bounds[1]

    @property
    def area(self) -> float:
        return self.width * self.height

    @cached_property
    def obstacle_array(self) -> np.ndarray:
        if not self.obstacles:
            return np.zeros((0, 4))
        return np.asarray(self.obstacles, dtype=float)

    @cached_property
    def bounds_array(self) -> np.ndarray:
        return np.asarray(self.bounds, dtype=float)

    def coverage(self) -> float:
        """Fraction of the bounds area covered by obstacles."""
        clipped = [rect_intersection(o, self.bounds) for o in self.obstacles]
        return union_area(c for c in clipped if c is not None) / self.area

    def contains(self, x: float, y: float) -> bool:
        b = self.bounds
        return b[0] <= x <= b[2] and b[1] <= y <= b[3]

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": ENV_SCHEMA,
            "name": self.name,
            "bounds": list(self.bounds),
            "obstacles": [list(o) for o in self.obstacles],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Environment":
        schema = data.get("schema", ENV_SCHEMA)
        if schema != ENV_SCHEMA:
            raise ValueError(f"unsupported environment schema {schema!r}")
        return cls(
            bounds=tuple(data["bounds"]),
            obstacles=tuple(tuple(o) for o in data.get("obstacles", [])),
            name=data.get("name", "env"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Environment":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class RobotModel:
    """Disc robot. ``kind`` is ``"geometric"`` (speed 1) or ``"unicycle"``."""

    radius: float
    kind: str = "geometric"
    v_max: float = 1.0
    omega_max: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.kind not in ("geometric", "unicycle"):
            raise ValueError(f"unknown robot kind {self.kind!r}")
        # zero bounds are admitted: an immobile unicycle is a valid (unsolvable) input
        if self.v_max < 0 or self.omega_max < 0:
            raise ValueError("control bounds must be non-negative")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def kinodynamic(self) -> bool:
        return self.kind == "unicycle"

    @property
    def speed(self) -> float:
        return self.v_max if self.kinodynamic else 1.0

    def to_dict(self) -> dict:
        return {"radius": self.radius, "kind": self.kind, "v_max": self.v_max, "omega_max": self.omega_max}

    @classmethod
    def from_dict(cls, data: dict) -> "RobotModel":
        return cls(**data)


def disc_free(env: Environment, p, radius: float) -> bool:
    p = as_config(p)
    return kernels.first_disc_hit(
        np.array([p.x]), np.array([p.y]), float(radius), env.obstacle_array, env.bounds_array
    ) < 0


def segment_free(env: Environment, a, b, radius: float, step: float | None = None) -> bool:
    """Sampled straight-line check; ``step`` defaults to ``radius / 2``."""
    a, b = as_config(a), as_config(b)
    if b.xy < a.xy:  # one canonical direction keeps the check symmetric
        a, b = b, a
    if step is None:
        step = radius / 2.0
    if not step > 0:
        raise ValueError("step must be positive")
    return not kernels.segment_hits(
        a.x, a.y, b.x, b.y, float(radius), float(step), env.obstacle_array, env.bounds_array
    )


def points_free(env: Environment, pts: np.ndarray, radius: float) -> bool:
    pts = np.asarray(pts, dtype=float)
    return kernels.first_disc_hit(
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]), float(radius),
        env.obstacle_array, env.bounds_array,
    ) < 0
