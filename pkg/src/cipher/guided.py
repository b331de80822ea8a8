"""Region-guided single-robot planners.

Guidance is a sampler: with probability ``p_guided`` a sample is drawn
uniformly from a cell in a short window of the robot's region path, starting
at the furthest path cell the search tree has reached (its frontier).
Otherwise the sample is uniform over the workspace bounds. Plugging in
:class:`UniformSampler` instead gives the plain planners.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .decomposition import Decomposition
from .geometry import Configuration, Environment, RobotModel, as_config, disc_free
from .mapf import RegionPath
from .trajectory import GeometricTrajectory, KinodynamicTrajectory

# geometric contact tolerance used by planners on top of the exact swept-disc test
EDGE_MARGIN = 1e-9
DEADLINE_EVERY = 64


class PlannerError(RuntimeError):
    pass


class InvalidEndpoint(PlannerError):
    pass


class BudgetExhausted(PlannerError):
    pass


class PlannerTimeout(PlannerError):
    pass


@dataclass(frozen=True)
class GuidanceParams:
    p_guided: float = 0.85
    lookahead: int = 2
    goal_bias: float = 0.05
    max_iterations: int = 20000
    goal_tolerance: float = 0.5  # kinodynamic position tolerance
    heading_tolerance: float | None = None  # None: goal heading ignored
    step_size: float = 1.0  # geometric extension length
    branching: int = 8  # candidate controls per kinodynamic extension
    dt_prop: float = 0.5
    substeps: int = 10
    heading_weight: float = 0.5  # times robot radius, nearest-neighbour metric
    wait_time: float = 0.5  # space-time planners
    max_waits: int = 4
    p_time: float = 0.3  # space-time planners: chance of sampling a target time
    max_wait: float = 5.0  # longest wait inserted before a timed extension

    def __post_init__(self):
        for name in ("p_guided", "goal_bias", "p_time"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.lookahead < 1:
            raise ValueError("lookahead must be >= 1")
        if self.max_iterations < 1 or self.branching < 1 or self.substeps < 1:
            raise ValueError("iteration, branching and substep counts must be >= 1")
        if not (self.step_size > 0 and self.dt_prop > 0 and self.goal_tolerance > 0):
            raise ValueError("step_size, dt_prop and goal_tolerance must be positive")

    @property
    def substep(self) -> float:
        return self.dt_prop / self.substeps

    def with_(self, **kw) -> "GuidanceParams":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# samplers


def _uniform_in(rect, rng, heading: bool) -> np.ndarray:
    u = rng.random(3 if heading else 2)
    x = rect[0] + u[0] * (rect[2] - rect[0])
    y = rect[1] + u[1] * (rect[3] - rect[1])
    if heading:
        return np.array([x, y, math.pi - 2.0 * math.pi * u[2]])
    return np.array([x, y])


def sample_uniform(env: Environment, rng, heading: bool = False) -> np.ndarray:
    return _uniform_in(env.bounds, rng, heading)


def sample_guided(
    path: RegionPath,
    frontier: int,
    params: GuidanceParams,
    rng,
    d: Decomposition,
    heading: bool = False,
    backward: bool = False,
) -> np.ndarray:
    """One sample biased toward the region path window after ``frontier``.

    ``backward`` mirrors the window (``[frontier - lookahead, frontier]``) for
    trees grown from the goal. With ``p_guided == 0`` no extra random draw is
    made, so the stream matches :func:`sample_uniform` exactly.
    """
    last = len(path.cells) - 1
    if not 0 <= frontier <= last:
        raise ValueError("frontier outside the region path")
    if params.p_guided > 0.0 and rng.random() < params.p_guided:
        if backward:
            lo, hi = max(frontier - params.lookahead, 0), frontier
        else:
            lo, hi = frontier, min(frontier + params.lookahead, last)
        k = lo + int(rng.integers(hi - lo + 1))
        return _uniform_in(d.rect(path.cells[k]), rng, heading)
    return _uniform_in(d.env.bounds, rng, heading)


class UniformSampler:
    def __init__(self, env: Environment, heading: bool = False):
        self.env = env
        self.heading = heading

    def sample(self, tree: int, rng) -> np.ndarray:
        return sample_uniform(self.env, rng, self.heading)

    def observe(self, tree: int, xy) -> None:
        pass


class GuidedSampler:
    """Tracks the furthest path index reached by each tree (tree 0 grows
    forward from the start, tree 1 backward from the goal)."""

    def __init__(self, d: Decomposition, path: RegionPath, params: GuidanceParams, heading: bool = False):
        self.d = d
        self.path = path
        self.params = params
        self.heading = heading
        self.first: dict = {}
        self.last: dict = {}
        for k, c in enumerate(path.cells):
            self.first.setdefault(c, k)
            self.last[c] = k
        self.frontier = [0, len(path.cells) - 1]

    def sample(self, tree: int, rng) -> np.ndarray:
        return sample_guided(
            self.path, self.frontier[tree], self.params, rng, self.d, self.heading, backward=tree == 1
        )

    def observe(self, tree: int, xy) -> None:
        if self.params.p_guided == 0.0:
            return
        c = self.d.project((min(max(xy[0], self.d.env.bounds[0]), self.d.env.bounds[2]),
                            min(max(xy[1], self.d.env.bounds[1]), self.d.env.bounds[3])))
        if tree == 0:
            k = self.last.get(c)
            if k is not None and k > self.frontier[0]:
                self.frontier[0] = k
        else:
            k = self.first.get(c)
            if k is not None and k < self.frontier[1]:
                self.frontier[1] = k


# ---------------------------------------------------------------------------
# helpers


class _Nodes:
    """Growable node array plus parent links."""

    def __init__(self, dim: int, cap: int = 256):
        self.data = np.empty((cap, dim))
        self.parent: list[int] = []
        self.n = 0

    def add(self, row, parent: int) -> int:
        if self.n == len(self.data):
            grown = np.empty((2 * len(self.data), self.data.shape[1]))
            grown[: self.n] = self.data[: self.n]
            self.data = grown
        self.data[self.n] = row
        self.parent.append(parent)
        self.n += 1
        return self.n - 1

    def chain(self, i: int) -> list[int]:
        out = []
        while i >= 0:
            out.append(i)
            i = self.parent[i]
        out.reverse()
        return out


def segment_clear(env: Environment, a, b, radius: float) -> bool:
    """Exact swept-disc test of the straight move from ``a`` to ``b``."""
    pts = np.array([[[a[0], a[1]], [b[0], b[1]]]], dtype=float)
    return not kernels.chains_hits(pts, radius + EDGE_MARGIN, env.obstacle_array, env.bounds_array)[0]


def arc_margin(robot: RobotModel, h: float) -> float:
    """Bound on how far a substep arc strays from its chord."""
    return robot.v_max * h * robot.omega_max * h / 8.0 + 1e-9


def check_endpoints(env: Environment, robot: RobotModel, start, goal) -> None:
    if not disc_free(env, start, robot.radius):
        raise InvalidEndpoint("start is in collision")
    if not disc_free(env, goal, robot.radius):
        raise InvalidEndpoint("goal is in collision")


class _Clock:
    def __init__(self, deadline: float | None):
        self.deadline = deadline
        self.count = 0

    def tick(self) -> None:
        self.count += 1
        if self.deadline is not None and self.count % DEADLINE_EVERY == 0:
            if time.perf_counter() > self.deadline:
                raise PlannerTimeout("planning deadline reached")


# ---------------------------------------------------------------------------
# geometric RRT-Connect


def rrt_connect(
    robot: RobotModel,
    start,
    goal,
    env: Environment,
    sampler,
    params: GuidanceParams,
    rng,
    *,
    robot_index: int = 0,
    deadline: float | None = None,
) -> GeometricTrajectory:
    start, goal = as_config(start), as_config(goal)
    check_endpoints(env, robot, start, goal)
    s = np.array(start.xy)
    g = np.array(goal.xy)
    if np.all(s == g):
        return GeometricTrajectory(robot_index, [0.0], [s])
    trees = [_Nodes(2), _Nodes(2)]
    trees[0].add(s, -1)
    trees[1].add(g, -1)
    sampler.observe(0, s)
    sampler.observe(1, g)
    ends = (s, g)
    r = robot.radius
    step = params.step_size
    clock = _Clock(deadline)

    def extend(k: int, target) -> tuple[int, bool]:
        """Step tree ``k`` toward ``target``; returns (new index or -1, reached)."""
        t = trees[k]
        i = int(kernels.nearest(t.data, t.n, target))
        near = t.data[i]
        dx, dy = target[0] - near[0], target[1] - near[1]
        dist = math.hypot(dx, dy)
        if dist == 0.0:
            return i, True
        reached = dist <= step
        new = np.array(target[:2], dtype=float) if reached else near + (step / dist) * np.array([dx, dy])
        if not segment_clear(env, near, new, r):
            return -1, False
        j = t.add(new, i)
        sampler.observe(k, new)
        return j, reached

    a = 0
    for _ in range(params.max_iterations):
        clock.tick()
        if rng.random() < params.goal_bias:
            q = ends[1 - a]
        else:
            q = sampler.sample(a, rng)
        j, _ = extend(a, q)
        if j >= 0:
            target = trees[a].data[j].copy()
            b = 1 - a
            while True:
                m, reached = extend(b, target)
                if m < 0:
                    break
                if reached:
                    ia, ib = (j, m) if a == 0 else (m, j)
                    fwd = [trees[0].data[i] for i in trees[0].chain(ia)]
                    bwd = [trees[1].data[i] for i in reversed(trees[1].chain(ib))]
                    pts = np.array(fwd + bwd[1:])
                    return GeometricTrajectory.constant_speed(robot_index, pts, 1.0)
        a = 1 - a
    raise BudgetExhausted(f"no connection after {params.max_iterations} iterations")


def plain_rrt_connect(robot, start, goal, env, params, rng, **kw) -> GeometricTrajectory:
    return rrt_connect(robot, start, goal, env, UniformSampler(env), params, rng, **kw)


def guided_rrt_connect(
    robot: RobotModel,
    start,
    goal,
    env: Environment,
    path: RegionPath,
    params: GuidanceParams,
    rng,
    *,
    decomposition: Decomposition,
    robot_index: int | None = None,
    deadline: float | None = None,
) -> GeometricTrajectory:
    sampler = GuidedSampler(decomposition, path, params)
    idx = path.robot if robot_index is None else robot_index
    return rrt_connect(robot, start, goal, env, sampler, params, rng, robot_index=idx, deadline=deadline)


# ---------------------------------------------------------------------------
# kinodynamic forward-propagation RRT


def sample_controls(robot: RobotModel, rng, count: int) -> tuple[np.ndarray, np.ndarray]:
    u = rng.random((2, count))
    vs = robot.v_max * (2.0 * u[0] - 1.0)
    ws = robot.omega_max * (2.0 * u[1] - 1.0)
    return vs, ws


def se2_dist(robot: RobotModel, params: GuidanceParams, states: np.ndarray, q: np.ndarray) -> np.ndarray:
    d = np.hypot(states[..., 0] - q[0], states[..., 1] - q[1])
    if len(q) < 3:
        return d
    dth = np.fmod(np.abs(states[..., 2] - q[2]), 2.0 * math.pi)
    dth = np.where(dth > math.pi, 2.0 * math.pi - dth, dth)
    return d + params.heading_weight * robot.radius * dth


def reached_goal(params: GuidanceParams, states: np.ndarray, goal: Configuration) -> np.ndarray:
    ok = np.hypot(states[..., 0] - goal.x, states[..., 1] - goal.y) <= params.goal_tolerance
    if params.heading_tolerance is not None and goal.theta is not None:
        dth = np.fmod(np.abs(states[..., 2] - goal.theta), 2.0 * math.pi)
        dth = np.where(dth > math.pi, 2.0 * math.pi - dth, dth)
        ok &= dth <= params.heading_tolerance
    return ok


def _start_state(start: Configuration) -> np.ndarray:
    return np.array([start.x, start.y, 0.0 if start.theta is None else start.theta])


def kinodynamic_rrt(
    robot: RobotModel,
    start,
    goal,
    env: Environment,
    sampler,
    params: GuidanceParams,
    rng,
    *,
    robot_index: int = 0,
    deadline: float | None = None,
) -> KinodynamicTrajectory:
    start, goal = as_config(start), as_config(goal)
    check_endpoints(env, robot, start, goal)
    s0 = _start_state(start)
    h = params.substep
    if reached_goal(params, s0[None, :], goal)[0]:
        return KinodynamicTrajectory(robot_index, s0, np.zeros((0, 3)), h)
    nodes = _Nodes(3)
    ctrl: list[tuple[float, float, float]] = [(0.0, 0.0, 0.0)]
    nodes.add(s0, -1)
    sampler.observe(0, s0)
    rad = robot.radius + arc_margin(robot, h)
    w = params.heading_weight * robot.radius
    gq = np.array([goal.x, goal.y])
    clock = _Clock(deadline)
    for _ in range(params.max_iterations):
        clock.tick()
        if rng.random() < params.goal_bias:
            q = gq
        else:
            q = sampler.sample(0, rng)
        if len(q) == 3:
            i = int(kernels.nearest_se2(nodes.data, nodes.n, q, w))
        else:
            i = int(kernels.nearest(nodes.data[:, :2], nodes.n, q))
        x = nodes.data[i]
        vs, ws = sample_controls(robot, rng, params.branching)
        rolls = kernels.rk4_unicycle(x[0], x[1], x[2], vs, ws, h, params.substeps)
        hits = kernels.chains_hits(np.ascontiguousarray(rolls[:, :, :2]), rad, env.obstacle_array, env.bounds_array)
        if hits.all():
            continue
        cost = se2_dist(robot, params, rolls[:, -1, :], q)
        cost[hits] = np.inf
        b = int(np.argmin(cost))
        roll = rolls[b]
        at_goal = reached_goal(params, roll[1:], goal)
        if at_goal.any():
            j = int(np.argmax(at_goal)) + 1
            nodes.add(roll[j], i)
            ctrl.append((vs[b], ws[b], j * h))
            chain = nodes.chain(nodes.n - 1)
            controls = np.array([ctrl[c] for c in chain[1:]])
            return KinodynamicTrajectory(robot_index, s0, controls, h)
        nodes.add(roll[-1], i)
        ctrl.append((vs[b], ws[b], params.dt_prop))
        sampler.observe(0, roll[-1])
    raise BudgetExhausted(f"goal not reached after {params.max_iterations} iterations")


def kinodynamic_guided_rrt(
    robot: RobotModel,
    start,
    goal,
    env: Environment,
    path: RegionPath,
    params: GuidanceParams,
    rng,
    *,
    decomposition: Decomposition,
    robot_index: int | None = None,
    deadline: float | None = None,
) -> KinodynamicTrajectory:
    if not robot.kinodynamic:
        raise ValueError("kinodynamic planning needs a unicycle robot")
    sampler = GuidedSampler(decomposition, path, params, heading=True)
    idx = path.robot if robot_index is None else robot_index
    return kinodynamic_rrt(robot, start, goal, env, sampler, params, rng, robot_index=idx, deadline=deadline)


def plain_kinodynamic_rrt(robot, start, goal, env, params, rng, **kw) -> KinodynamicTrajectory:
    return kinodynamic_rrt(robot, start, goal, env, UniformSampler(env, heading=True), params, rng, **kw)
