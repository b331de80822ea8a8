"""Space-time single-tree planners that avoid already-committed robots.

Committed trajectories are sampled once on the global check grid
``k * dt_check``; a candidate motion is accepted only if, at every grid time
inside its time span, the robot keeps ``r + r_j + margin`` away from each
committed robot ``j``. After a tree reaches the goal the robot must also be
able to rest there for as long as any committed robot still moves.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import kernels
from .conflict import DT_CHECK
from .decomposition import Decomposition
from .geometry import Environment, RobotModel, as_config
from .guided import (
    BudgetExhausted,
    GuidanceParams,
    GuidedSampler,
    UniformSampler,
    _Clock,
    _Nodes,
    _start_state,
    arc_margin,
    check_endpoints,
    reached_goal,
    sample_controls,
    se2_dist,
    segment_clear,
)
from .mapf import RegionPath
from .trajectory import GeometricTrajectory, KinodynamicTrajectory, Trajectory, time_grid

PAIR_MARGIN = 1e-6
MIN_DT = 1e-6  # shortest move or wait; keeps waypoint times strictly increasing


class DynamicObstacles:
    """Committed robots as moving discs, queryable on the check grid."""

    def __init__(self, trajs: Sequence[Trajectory], radii: Sequence[float], dt_check: float = DT_CHECK):
        self.trajs = list(trajs)
        self.radii = np.asarray(radii, dtype=float).reshape(-1)
        self.dt = float(dt_check)
        horizon = max((t.duration for t in self.trajs), default=0.0)
        self.ts = time_grid(horizon, self.dt)
        if self.trajs:
            self.pos = np.stack([t.positions_at(self.ts) for t in self.trajs])
            self.px = np.ascontiguousarray(self.pos)
        else:
            self.pos = np.zeros((0, 1, 2))
            self.px = self.pos

    @property
    def empty(self) -> bool:
        return len(self.trajs) == 0

    @property
    def last_index(self) -> int:
        return len(self.ts) - 1

    def grid_in(self, t0: float, t1: float) -> np.ndarray:
        """Grid indices ``k`` with ``t0 <= k * dt <= t1`` (up to rounding)."""
        lo = max(int(math.floor(t0 / self.dt)) - 1, 0)
        hi = int(math.ceil(t1 / self.dt)) + 1
        ks = np.arange(lo, hi + 1)
        tk = ks * self.dt
        return ks[(tk >= t0 - 1e-9) & (tk <= t1 + 1e-9)]

    def clear(self, xs, ys, ks, radius: float) -> bool:
        if self.empty or len(ks) == 0:
            return True
        return bool(kernels.moving_clear(
            np.ascontiguousarray(xs, dtype=float), np.ascontiguousarray(ys, dtype=float),
            np.ascontiguousarray(ks, dtype=np.int64), self.px, self.radii, float(radius), PAIR_MARGIN,
        ))

    def linear_clear(self, p0, t0: float, p1, t1: float, radius: float) -> bool:
        if self.empty:
            return True
        ks = self.grid_in(t0, t1)
        if len(ks) == 0:
            return True
        tk = ks * self.dt
        s = (tk - t0) / (t1 - t0) if t1 > t0 else np.zeros(len(ks))
        xs = p0[0] + s * (p1[0] - p0[0])
        ys = p0[1] + s * (p1[1] - p0[1])
        return self.clear(xs, ys, ks, radius)

    def rest_clear(self, p, t: float, radius: float) -> bool:
        """Can a robot sit at ``p`` from time ``t`` on?"""
        if self.empty:
            return True
        k0 = int(math.ceil(t / self.dt - 1e-9))
        k0 = max(min(k0, self.last_index), 0)
        ks = np.arange(k0, self.last_index + 1)
        return self.clear(np.full(len(ks), p[0]), np.full(len(ks), p[1]), ks, radius)

    @property
    def horizon(self) -> float:
        return float(self.ts[-1]) if len(self.ts) else 0.0


def _nearest_xyt(data: np.ndarray, n: int, q, tq: float, tcol: int) -> int:
    """Nearest node in (x, y, t) with unit speed as the time scale."""
    d = data[:n]
    acc = (d[:, 0] - q[0]) ** 2 + (d[:, 1] - q[1]) ** 2 + (d[:, tcol] - tq) ** 2
    return int(np.argmin(acc))


def _time_target(obstacles: "DynamicObstacles", s, g, rng) -> float:
    t_hi = obstacles.horizon + math.hypot(g[0] - s[0], g[1] - s[1]) + 5.0
    return float(rng.uniform(0.0, t_hi))


# ---------------------------------------------------------------------------
# geometric


def spacetime_rrt(
    robot: RobotModel,
    start,
    goal,
    env: Environment,
    obstacles: DynamicObstacles,
    sampler,
    params: GuidanceParams,
    rng,
    *,
    robot_index: int = 0,
    deadline: float | None = None,
) -> GeometricTrajectory:
    """Single space-time tree at speed <= 1; waits are inserted only where a
    move is blocked by a committed robot."""
    start, goal = as_config(start), as_config(goal)
    check_endpoints(env, robot, start, goal)
    r = robot.radius
    s = np.array(start.xy)
    g = np.array(goal.xy)
    if not obstacles.linear_clear(s, 0.0, s, 0.0, r):
        raise BudgetExhausted("start overlaps a committed robot")
    if np.all(s == g) and obstacles.rest_clear(s, 0.0, r):
        return GeometricTrajectory(robot_index, [0.0], [s])
    nodes = _Nodes(3)  # x, y, t
    nodes.add((s[0], s[1], 0.0), -1)
    waited: dict[int, int] = {}
    sampler.observe(0, s)
    step = params.step_size
    clock = _Clock(deadline)

    def finish(j: int) -> GeometricTrajectory:
        rows = nodes.data[nodes.chain(j)]
        return GeometricTrajectory(robot_index, rows[:, 2], rows[:, :2])

    def try_move(i: int, target) -> int:
        """Returns new node index, -1 if statically blocked, -2 if blocked by a robot."""
        x, y, t = nodes.data[i]
        dx, dy = target[0] - x, target[1] - y
        dist = math.hypot(dx, dy)
        if dist < MIN_DT:
            return -1
        if dist > step:
            new = (x + step * dx / dist, y + step * dy / dist)
            dist = step
        else:
            new = (float(target[0]), float(target[1]))
        if not segment_clear(env, (x, y), new, r):
            return -1
        t1 = t + dist
        if not obstacles.linear_clear((x, y), t, new, t1, r):
            return -2
        return nodes.add((new[0], new[1], t1), i)

    def wait_child(i: int) -> int:
        j = waited.get(i)
        if j is not None:
            return j
        x, y, t = nodes.data[i]
        t1 = t + params.wait_time
        if not obstacles.linear_clear((x, y), t, (x, y), t1, r):
            return -1
        j = nodes.add((x, y, t1), i)
        waited[i] = j
        return j

    def grow(i: int, target) -> int:
        j = try_move(i, target)
        k = 0
        while j == -2 and k < params.max_waits:
            i = wait_child(i)
            if i < 0:
                return -1
            j = try_move(i, target)
            k += 1
        return j

    def timed_wait(i: int, q, tq: float) -> int:
        """Wait at node ``i`` so that a straight move to ``q`` ends near ``tq``."""
        x, y, t = nodes.data[i]
        wait = min(tq - t - min(math.hypot(q[0] - x, q[1] - y), step), params.max_wait)
        if wait < MIN_DT:
            return i
        if not obstacles.linear_clear((x, y), t, (x, y), t + wait, r):
            return i
        return nodes.add((x, y, t + wait), i)

    timed_ok = not obstacles.empty and params.p_time > 0.0
    for _ in range(params.max_iterations):
        clock.tick()
        go_goal = rng.random() < params.goal_bias
        q = g if go_goal else sampler.sample(0, rng)
        if timed_ok and rng.random() < params.p_time:
            tq = _time_target(obstacles, s, g, rng)
            i = _nearest_xyt(nodes.data, nodes.n, q, tq, 2)
            i = timed_wait(i, q, tq)
        else:
            i = int(kernels.nearest(nodes.data[:, :2], nodes.n, q[:2]))
        j = grow(i, q)
        if j < 0:
            continue
        p = nodes.data[j]
        sampler.observe(0, p[:2])
        if math.hypot(p[0] - g[0], p[1] - g[1]) <= step:
            m = grow(j, g) if (p[0], p[1]) != (g[0], g[1]) else j
            if m >= 0:
                pg = nodes.data[m]
                if pg[0] == g[0] and pg[1] == g[1] and obstacles.rest_clear(g, pg[2], r):
                    return finish(m)
    raise BudgetExhausted(f"robot {robot_index}: no dynamic-obstacle-free path after {params.max_iterations} iterations")


# ---------------------------------------------------------------------------
# kinodynamic


def _kino_clear(obstacles: DynamicObstacles, x0: np.ndarray, v: float, w: float, t0: float, dur: float, h: float, radius: float) -> bool:
    if obstacles.empty:
        return True
    ks = obstacles.grid_in(t0, t0 + dur)
    if len(ks) == 0:
        return True
    taus = np.maximum(ks * obstacles.dt - t0, 0.0)
    states = kernels.unicycle_eval(
        x0[None, :], np.array([[v, w]]), np.zeros(len(ks), dtype=np.int64), taus, h
    )
    return obstacles.clear(states[:, 0], states[:, 1], ks, radius)


def spacetime_kinodynamic_rrt(
    robot: RobotModel,
    start,
    goal,
    env: Environment,
    obstacles: DynamicObstacles,
    sampler,
    params: GuidanceParams,
    rng,
    *,
    robot_index: int = 0,
    deadline: float | None = None,
) -> KinodynamicTrajectory:
    start, goal = as_config(start), as_config(goal)
    check_endpoints(env, robot, start, goal)
    r = robot.radius
    h = params.substep
    s0 = _start_state(start)
    if reached_goal(params, s0[None, :], goal)[0] and obstacles.rest_clear(s0, 0.0, r):
        return KinodynamicTrajectory(robot_index, s0, np.zeros((0, 3)), h)
    nodes = _Nodes(4)  # x, y, theta, t
    nodes.add((s0[0], s0[1], s0[2], 0.0), -1)
    ctrl: list[tuple[float, float, float]] = [(0.0, 0.0, 0.0)]
    waited: dict[int, int] = {}
    sampler.observe(0, s0)
    rad = r + arc_margin(robot, h)
    w = params.heading_weight * r
    gq = np.array([goal.x, goal.y])
    clock = _Clock(deadline)

    def wait_child(i: int) -> int:
        j = waited.get(i)
        if j is not None:
            return j
        x = nodes.data[i]
        if not _kino_clear(obstacles, x[:3], 0.0, 0.0, x[3], params.dt_prop, h, r):
            return -1
        j = nodes.add(x[:3].tolist() + [x[3] + params.dt_prop], i)
        ctrl.append((0.0, 0.0, params.dt_prop))
        waited[i] = j
        return j

    def timed_wait(i: int, q, tq: float) -> int:
        x = nodes.data[i]
        wait = min(tq - x[3] - params.dt_prop, params.max_wait)
        if wait < MIN_DT or not _kino_clear(obstacles, x[:3], 0.0, 0.0, x[3], wait, h, r):
            return i
        nodes.add(x[:3].tolist() + [x[3] + wait], i)
        ctrl.append((0.0, 0.0, wait))
        return nodes.n - 1

    timed_ok = not obstacles.empty and params.p_time > 0.0
    for _ in range(params.max_iterations):
        clock.tick()
        q = gq if rng.random() < params.goal_bias else sampler.sample(0, rng)
        if timed_ok and rng.random() < params.p_time:
            tq = _time_target(obstacles, s0, gq, rng)
            i = timed_wait(_nearest_xyt(nodes.data, nodes.n, q, tq, 3), q, tq)
        elif len(q) == 3:
            i = int(kernels.nearest_se2(nodes.data[:, :3], nodes.n, q, w))
        else:
            i = int(kernels.nearest(nodes.data[:, :2], nodes.n, q))
        vs, ws = sample_controls(robot, rng, params.branching)
        chosen = -1
        for attempt in range(params.max_waits + 1):
            x = nodes.data[i]
            rolls = kernels.rk4_unicycle(x[0], x[1], x[2], vs, ws, h, params.substeps)
            hits = kernels.chains_hits(np.ascontiguousarray(rolls[:, :, :2]), rad, env.obstacle_array, env.bounds_array)
            if hits.all():
                break
            cost = se2_dist(robot, params, rolls[:, -1, :], q)
            cost[hits] = np.inf
            chosen = -1
            blocked = False
            for b in np.argsort(cost, kind="stable"):
                if not np.isfinite(cost[b]):
                    break
                at_goal = reached_goal(params, rolls[b, 1:], goal)
                dur = (int(np.argmax(at_goal)) + 1) * h if at_goal.any() else params.dt_prop
                if _kino_clear(obstacles, x[:3], vs[b], ws[b], x[3], dur, h, r):
                    chosen = int(b)
                    break
                blocked = True
            if chosen >= 0:
                break
            if not blocked:
                break
            i = wait_child(i)
            if i < 0:
                break
        else:
            chosen = -1
        if chosen < 0 or i < 0:
            continue
        x = nodes.data[i].copy()
        roll = rolls[chosen]
        at_goal = reached_goal(params, roll[1:], goal)
        if at_goal.any():
            j = int(np.argmax(at_goal)) + 1
            t1 = x[3] + j * h
            if obstacles.rest_clear(roll[j], t1, r):
                nodes.add(roll[j].tolist() + [t1], i)
                ctrl.append((vs[chosen], ws[chosen], j * h))
                chain = nodes.chain(nodes.n - 1)
                return KinodynamicTrajectory(robot_index, s0, np.array([ctrl[c] for c in chain[1:]]), h)
            continue
        nodes.add(roll[-1].tolist() + [x[3] + params.dt_prop], i)
        ctrl.append((vs[chosen], ws[chosen], params.dt_prop))
        sampler.observe(0, roll[-1])
    raise BudgetExhausted(f"robot {robot_index}: goal not reached after {params.max_iterations} iterations")


# ---------------------------------------------------------------------------
# dispatch


def plan_against(
    robot: RobotModel,
    start,
    goal,
    env: Environment,
    obstacles: DynamicObstacles,
    params: GuidanceParams,
    rng,
    *,
    robot_index: int,
    path: RegionPath | None = None,
    decomposition: Decomposition | None = None,
    deadline: float | None = None,
) -> Trajectory:
    """Space-time plan for one robot; guided when a region path is given."""
    heading = robot.kinodynamic
    if path is not None:
        sampler = GuidedSampler(decomposition, path, params, heading=heading)
    else:
        sampler = UniformSampler(env, heading=heading)
    fn = spacetime_kinodynamic_rrt if robot.kinodynamic else spacetime_rrt
    return fn(robot, start, goal, env, obstacles, sampler, params, rng, robot_index=robot_index, deadline=deadline)
