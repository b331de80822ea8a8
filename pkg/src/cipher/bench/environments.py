"""Environment and scenario generators, plus hand-built instances."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from ..geometry import Configuration, Environment, RobotModel, disc_free, union_area
from ..problem import Problem

SCENARIO_SCHEMA = "cipher.scenario/1"

CLUTTER_LEVELS = {"clutter-10": 0.10, "clutter-20": 0.20, "clutter-30": 0.30}
ENV_KINDS = ("empty", "rooms", "clutter")


class GenerationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# free-space connectivity on a fine grid


def free_grid(env: Environment, radius: float, res: float = 0.1):
    """Label connected components of disc-center positions that are obstacle free.

    Returns ``(labels, xs, ys)`` where ``labels[j, i]`` is the component id of
    the grid point ``(xs[i], ys[j])`` (0 = blocked).
    """
    b = env.bounds
    xs = np.arange(b[0] + res / 2, b[2], res)
    ys = np.arange(b[1] + res / 2, b[3], res)
    X, Y = np.meshgrid(xs, ys)
    free = (X - radius > b[0]) & (X + radius < b[2]) & (Y - radius > b[1]) & (Y + radius < b[3])
    for o in env.obstacles:
        dx = np.maximum(np.maximum(o[0] - X, X - o[2]), 0.0)
        dy = np.maximum(np.maximum(o[1] - Y, Y - o[3]), 0.0)
        free &= dx * dx + dy * dy > radius * radius
    labels, _ = ndimage.label(free)
    return labels, xs, ys


def _main_component(labels: np.ndarray) -> int:
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    return int(np.argmax(counts)) if counts.sum() else 0


def _label_at(labels, xs, ys, x: float, y: float) -> int:
    i = int(np.clip(np.searchsorted(xs, x) - (0 if x >= xs[0] else 0), 0, len(xs) - 1))
    j = int(np.clip(np.searchsorted(ys, y), 0, len(ys) - 1))
    # nearest grid point
    if i > 0 and abs(xs[i - 1] - x) < abs(xs[i] - x):
        i -= 1
    if j > 0 and abs(ys[j - 1] - y) < abs(ys[j] - y):
        j -= 1
    return int(labels[j, i])


def free_space_connected(env: Environment, radius: float, res: float = 0.1, tol: float = 0.02) -> bool:
    """True when all but ``tol`` of the free grid points form one component."""
    labels, _, _ = free_grid(env, radius, res)
    total = int((labels > 0).sum())
    if total == 0:
        return False
    main = _main_component(labels)
    return (labels == main).sum() >= (1.0 - tol) * total


# ---------------------------------------------------------------------------
# environments


def rooms_environment(size: float = 20.0, wall: float = 0.5, door: float = 3.0, name: str = "rooms") -> Environment:
    """2x2 rooms: a cross of walls with one centred door in each half-wall."""
    c = size / 2.0
    h = wall / 2.0
    q = size / 4.0
    obstacles = []
    # vertical wall pieces (x in [c-h, c+h]) and horizontal ones, door centred at size/4 and 3*size/4
    cuts = [0.0, q - door / 2, q + door / 2, 3 * q - door / 2, 3 * q + door / 2, size]
    for lo, hi in ((cuts[0], cuts[1]), (cuts[2], cuts[3]), (cuts[4], cuts[5])):
        obstacles.append((c - h, lo, c + h, hi))
        obstacles.append((lo, c - h, hi, c + h))
    return Environment((0.0, 0.0, size, size), tuple(obstacles), name)


def clutter_environment(
    coverage: float,
    seed: int,
    size: float = 20.0,
    robot_radius: float = 0.5,
    side_range: tuple[float, float] = (1.0, 4.0),
    tol: float = 0.02,
    max_attempts: int = 20000,
    name: str | None = None,
) -> Environment:
    """Random rectangles until the covered fraction is within ``tol`` of ``coverage``.

    Rectangles stay ``2`` robot diameters away from the boundary, and a
    candidate is rejected if it would cut the free space (for a slightly
    inflated robot) into several components.
    """
    if not 0.0 <= coverage < 1.0:
        raise ValueError("coverage must be in [0, 1)")
    rng = np.random.default_rng(seed)
    margin = 4.0 * robot_radius
    lo, hi = margin, size - margin
    bounds = (0.0, 0.0, size, size)
    area = size * size
    rects: list[tuple[float, float, float, float]] = []
    covered = 0.0
    aim = coverage + tol / 4.0
    for _ in range(max_attempts):
        if covered >= coverage - tol / 2.0:
            break
        w, h = rng.uniform(side_range[0], side_range[1], 2)
        x = rng.uniform(lo, hi - w)
        y = rng.uniform(lo, hi - h)
        cand = (float(x), float(y), float(x + w), float(y + h))
        new_cov = union_area(rects + [cand]) / area
        if new_cov > aim + tol / 2.0 or new_cov - covered < 1e-9:
            continue
        env = Environment(bounds, tuple(rects + [cand]))
        if not free_space_connected(env, 1.2 * robot_radius, 0.1):
            continue
        rects.append(cand)
        covered = new_cov
    if abs(covered - coverage) > tol:
        raise GenerationError(f"reached coverage {covered:.3f}, target {coverage:.3f}")
    return Environment(bounds, tuple(rects), name or f"clutter-{int(round(coverage * 100))}")


def gen_environment(kind: str, params: dict | None = None, seed: int = 0) -> Environment:
    """``kind``: ``empty`` | ``rooms`` | ``clutter`` (or ``clutter-10/20/30``)."""
    params = dict(params or {})
    size = float(params.get("size", 20.0))
    radius = float(params.get("robot_radius", 0.5))
    if kind == "empty":
        return Environment((0.0, 0.0, size, size), (), "empty")
    if kind == "rooms":
        return rooms_environment(size, float(params.get("wall", 0.5)), float(params.get("door", 6.0 * radius)))
    if kind in CLUTTER_LEVELS:
        params.setdefault("coverage", CLUTTER_LEVELS[kind])
        kind = "clutter"
    if kind == "clutter":
        if "coverage" not in params:
            raise ValueError("clutter needs a coverage fraction")
        return clutter_environment(
            float(params["coverage"]), seed, size, radius,
            tuple(params.get("side_range", (1.0, 4.0))), float(params.get("tol", 0.02)),
        )
    raise ValueError(f"unknown environment kind {kind!r}")


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Scenario:
    env_name: str
    robot: RobotModel
    starts: tuple[Configuration, ...]
    goals: tuple[Configuration, ...]
    seed: int

    @property
    def n(self) -> int:
        return len(self.starts)

    def problem(self, env: Environment, time_limit: float = 60.0, seed: int | None = None) -> Problem:
        return Problem(env, (self.robot,) * self.n, self.starts, self.goals, time_limit,
                       self.seed if seed is None else seed)

    def to_dict(self) -> dict:
        return {
            "schema": SCENARIO_SCHEMA,
            "env": self.env_name,
            "robot": self.robot.to_dict(),
            "starts": [s.to_list() for s in self.starts],
            "goals": [g.to_list() for g in self.goals],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if data.get("schema") != SCENARIO_SCHEMA:
            raise ValueError(f"unsupported scenario schema {data.get('schema')!r}")
        return cls(
            data["env"], RobotModel.from_dict(data["robot"]),
            tuple(Configuration.from_seq(s) for s in data["starts"]),
            tuple(Configuration.from_seq(g) for g in data["goals"]),
            data["seed"],
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


def gen_scenario(
    env: Environment,
    n: int,
    robot: RobotModel | None = None,
    seed: int = 0,
    *,
    clearance: float = 1.2,
    max_attempts: int = 10000,
) -> Scenario:
    """Random starts and goals, each disc ``clearance * radius`` clear of
    obstacles, inside the main free component, and pairwise ``>= 2.2 r`` apart."""
    if n < 1:
        raise ValueError("n must be >= 1")
    robot = robot or RobotModel(0.5)
    r = robot.radius
    rng = np.random.default_rng(seed)
    labels = None
    if env.obstacles:
        labels, xs, ys = free_grid(env, r, 0.1)
        main = _main_component(labels)
    b = env.bounds

    def draw(existing: list) -> Configuration:
        for _ in range(max_attempts):
            u = rng.random(3)
            x = b[0] + u[0] * (b[2] - b[0])
            y = b[1] + u[1] * (b[3] - b[1])
            if not disc_free(env, (x, y), clearance * r):
                continue
            if labels is not None and _label_at(labels, xs, ys, x, y) != main:
                continue
            if any(math.hypot(x - e.x, y - e.y) < 2.2 * r for e in existing):
                continue
            th = math.pi - 2.0 * math.pi * u[2] if robot.kinodynamic else None
            return Configuration(x, y, th)
        raise GenerationError(f"could not place {n} robots in {env.name}")

    starts: list[Configuration] = []
    for _ in range(n):
        starts.append(draw(starts))
    goals: list[Configuration] = []
    for _ in range(n):
        goals.append(draw(goals))
    return Scenario(env.name, robot, tuple(starts), tuple(goals), seed)


# ---------------------------------------------------------------------------
# constructed instances


def crossing_instance(robot: RobotModel | None = None) -> tuple[Problem, int]:
    """Two robots whose straight-line motions cross inside base cell (0, 0).

    Returns the problem and the base resolution ``l`` (8 x 8 cells on a
    16 x 16 workspace with ``l = 2``).
    """
    robot = robot or RobotModel(0.5)
    env = Environment((0.0, 0.0, 16.0, 16.0), (), "crossing")
    th = 0.0 if robot.kinodynamic else None
    starts = (Configuration(1.0, 4.5, th), Configuration(4.5, 1.0, th))
    goals = (Configuration(7.0, 4.5, th), Configuration(4.5, 7.0, th))
    return Problem(env, (robot, robot), starts, goals, 60.0, 0), 2


def corridor_swap_instance(robot: RobotModel | None = None) -> Problem:
    """Two robots swap ends of a narrow corridor with a one-robot side pocket
    in the middle. Whoever plans first drives straight through, so
    prioritized planning fails in either order."""
    robot = robot or RobotModel(0.5)
    r = robot.radius
    width = 2.8 * r
    length = 14.0
    y0 = 0.6 * r
    y1 = y0 + width
    mid = length / 2.0
    pocket = (mid - width / 2.0, mid + width / 2.0)
    depth = 2.6 * r + 1.2 * r
    top = y1 + depth + 0.6 * r
    env = Environment(
        (0.0, 0.0, length, top),
        (
            (0.0, 0.0, length, y0),
            (0.0, y1, pocket[0], top),
            (pocket[1], y1, length, top),
            (pocket[0], y1 + depth, pocket[1], top),
        ),
        "corridor-swap",
    )
    yc = (y0 + y1) / 2.0
    th = (0.0, math.pi) if robot.kinodynamic else (None, None)
    starts = (Configuration(2.0 * r, yc, th[0]), Configuration(length - 2.0 * r, yc, th[1]))
    goals = (Configuration(length - 2.0 * r, yc), Configuration(2.0 * r, yc))
    return Problem(env, (robot, robot), starts, goals, 120.0, 0)


def blocking_instance(robot: RobotModel | None = None) -> Problem:
    """Robot 0 rests at its goal in the middle of the single-lane corridor
    robot 1 must use. A dead-end pocket beside it lets a coordinated planner
    step robot 0 aside; planning robot 0 first leaves it parked for good."""
    robot = robot or RobotModel(0.5)
    env = Environment(
        (0.0, 0.0, 20.0, 8.0),
        ((6.0, 0.0, 14.0, 3.3), (6.0, 4.7, 9.0, 8.0), (11.0, 4.7, 14.0, 8.0)),
        "blocking",
    )
    th = 0.0 if robot.kinodynamic else None
    starts = (Configuration(10.0, 4.0, th), Configuration(3.0, 6.0, th))
    goals = (Configuration(10.0, 4.0), Configuration(17.0, 4.0))
    return Problem(env, (robot, robot), starts, goals, 60.0, 0)


def diagonal_swap_instance(robot: RobotModel | None = None, size: float = 16.0) -> Problem:
    """Four robots in the corners of a square room with a central block,
    each heading to the diagonally opposite corner."""
    robot = robot or RobotModel(0.5, "unicycle")
    c = size / 2.0
    env = Environment((0.0, 0.0, size, size), ((c - 2.0, c - 2.0, c + 2.0, c + 2.0),), "diagonal-swap")
    m = 2.0
    corners = [(m, m), (size - m, size - m), (m, size - m), (size - m, m)]
    opposite = [corners[1], corners[0], corners[3], corners[2]]
    starts, goals = [], []
    for (x, y), (gx, gy) in zip(corners, opposite):
        th = math.atan2(gy - y, gx - x) if robot.kinodynamic else None
        starts.append(Configuration(x, y, th))
        goals.append(Configuration(gx, gy))
    return Problem(env, (robot,) * 4, tuple(starts), tuple(goals), 60.0, 0)
