"""Unguided fallback planners: prioritized decoupled RRT and composite RRT."""

from __future__ import annotations

import logging
import math
import time
from typing import Sequence

import numpy as np

from . import kernels
from .conflict import DT_CHECK
from .decomposition import Decomposition
from .geometry import Environment, RobotModel
from .guided import (
    BudgetExhausted,
    GuidanceParams,
    PlannerError,
    PlannerTimeout,
    _Clock,
    _Nodes,
    _start_state,
    arc_margin,
    check_endpoints,
    reached_goal,
)
from .mapf import RegionPath
from .problem import Problem
from .spacetime import PAIR_MARGIN, DynamicObstacles, plan_against
from .trajectory import GeometricTrajectory, KinodynamicTrajectory, Trajectory, distinct_rows

log = logging.getLogger(__name__)


class RobotFailure(PlannerError):
    def __init__(self, robot: int, reason: str = ""):
        super().__init__(f"robot {robot} failed: {reason}")
        self.robot = robot


class DynamicObstacleSet(DynamicObstacles):
    """Higher-priority robots as moving obstacles (stationary after their end)."""


def prioritized_decoupled_rrt(
    problem: Problem,
    order: Sequence[int] | None,
    params: GuidanceParams,
    rng,
    *,
    deadline: float | None = None,
    dt_check: float = DT_CHECK,
    paths: Sequence[RegionPath] | None = None,
    decomposition: Decomposition | None = None,
) -> list[Trajectory]:
    """Plan robots one at a time in ``order``; earlier robots are moving obstacles.

    With ``paths`` and ``decomposition`` each robot samples along its region
    path (the PP-RG-RRT baseline); without them sampling is uniform.
    Raises :class:`RobotFailure` naming the first robot that fails.
    """
    n = problem.n
    order = list(range(n)) if order is None else list(order)
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of robot indices")
    done: dict[int, Trajectory] = {}
    for i in order:
        committed = [done[j] for j in done]
        radii = [problem.robots[j].radius for j in done]
        obstacles = DynamicObstacleSet(committed, radii, dt_check)
        try:
            done[i] = plan_against(
                problem.robots[i], problem.starts[i], problem.goals[i], problem.env, obstacles, params, rng,
                robot_index=i,
                path=None if paths is None else paths[i],
                decomposition=decomposition,
                deadline=deadline,
            )
        except PlannerTimeout:
            raise
        except PlannerError as exc:
            raise RobotFailure(i, str(exc)) from exc
    return [done[i] for i in range(n)]


# ---------------------------------------------------------------------------
# composite


def _joint_segment_valid(env: Environment, radii: np.ndarray, a: np.ndarray, b: np.ndarray) -> bool:
    """``a``, ``b``: ``(n, 2)`` joint positions moved linearly over one common interval."""
    pts = np.ascontiguousarray(np.stack([a, b], axis=1))
    for k in range(len(radii)):
        if kernels.chains_hits(pts[k : k + 1], radii[k] + 1e-9, env.obstacle_array, env.bounds_array)[0]:
            return False
    return bool(kernels.linear_pairs_clear(np.ascontiguousarray(a), np.ascontiguousarray(b), radii, PAIR_MARGIN))


def composite_rrt_geometric(
    problem: Problem,
    params: GuidanceParams,
    rng,
    *,
    deadline: float | None = None,
    max_iterations: int = 200000,
) -> list[GeometricTrajectory]:
    """Single goal-biased RRT over all robots' positions."""
    n = problem.n
    env = problem.env
    for i in range(n):
        check_endpoints(env, problem.robots[i], problem.starts[i], problem.goals[i])
    radii = np.array([r.radius for r in problem.robots])
    s = np.array([c.xy for c in problem.starts], dtype=float).reshape(-1)
    g = np.array([c.xy for c in problem.goals], dtype=float).reshape(-1)
    if np.all(s == g):
        return [GeometricTrajectory(i, [0.0], [s[2 * i : 2 * i + 2]]) for i in range(n)]
    step = params.step_size * max(1.0, math.sqrt(n) / 2.0)
    lo = np.tile(env.bounds[:2], n)
    span = np.tile([env.width, env.height], n)
    tree = _Nodes(2 * n)
    tree.add(s, -1)
    clock = _Clock(deadline)

    def valid(a, b) -> bool:
        return _joint_segment_valid(env, radii, a.reshape(n, 2), b.reshape(n, 2))

    for _ in range(max_iterations):
        clock.tick()
        q = g if rng.random() < params.goal_bias else lo + rng.random(2 * n) * span
        i = int(kernels.nearest(tree.data, tree.n, q))
        near = tree.data[i]
        diff = q - near
        dist = float(np.sqrt(diff @ diff))
        if dist == 0.0:
            continue
        new = q.copy() if dist <= step else near + (step / dist) * diff
        if not valid(near, new):
            continue
        j = tree.add(new, i)
        gap = g - new
        if float(np.sqrt(gap @ gap)) <= step and (np.all(new == g) or valid(new, g)):
            if not np.all(new == g):
                j = tree.add(g, j)
            return _split_joint(tree.data[tree.chain(j)], n)
    raise BudgetExhausted(f"composite search exhausted {max_iterations} iterations")


def _split_joint(rows: np.ndarray, n: int) -> list[GeometricTrajectory]:
    """Common time law: each joint edge lasts as long as its longest single-robot move."""
    pos = rows.reshape(len(rows), n, 2)
    pos = pos[distinct_rows(pos)]
    moves = np.hypot(*np.moveaxis(np.diff(pos, axis=0), 2, 0)) if len(pos) > 1 else np.zeros((0, n))
    dur = moves.max(axis=1) if len(moves) else np.zeros(0)
    times = np.concatenate(([0.0], np.cumsum(dur)))
    return [GeometricTrajectory(i, times, pos[:, i, :]) for i in range(n)]


def composite_rrt_kinodynamic(
    problem: Problem,
    params: GuidanceParams,
    rng,
    *,
    deadline: float | None = None,
    max_iterations: int = 200000,
) -> list[KinodynamicTrajectory]:
    """Single forward tree over the joint unicycle state; each extension
    samples one control per robot for each of ``branching`` candidates.

    Robots already within goal tolerance get a zero control in half of the
    candidates so the joint goal region can be reached.
    """
    n = problem.n
    env = problem.env
    robots = problem.robots
    for i in range(n):
        check_endpoints(env, robots[i], problem.starts[i], problem.goals[i])
    h = params.substep
    ns = params.substeps
    radii = np.array([r.radius for r in robots])
    vmax = np.array([r.v_max for r in robots])
    wmax = np.array([r.omega_max for r in robots])
    rad_static = radii + np.array([arc_margin(r, h) for r in robots])
    pair_lim = radii[:, None] + radii[None, :] + (vmax[:, None] + vmax[None, :]) * h / 2.0 + PAIR_MARGIN
    iu = np.triu_indices(n, 1)
    s0 = np.stack([_start_state(c) for c in problem.starts])
    goals = problem.goals
    hw = params.heading_weight * radii

    def all_at_goal(states: np.ndarray) -> np.ndarray:
        # states (..., n, 3) -> bool (...)
        ok = np.ones(states.shape[:-2], dtype=bool)
        for i in range(n):
            ok &= reached_goal(params, states[..., i, :], goals[i])
        return ok

    if all_at_goal(s0[None])[0]:
        return [KinodynamicTrajectory(i, s0[i], np.zeros((0, 3)), h) for i in range(n)]
    nodes = _Nodes(3 * n)
    nodes.add(s0.reshape(-1), -1)
    ctrl: list[np.ndarray] = [np.zeros((n, 3))]
    gpos = np.array([c.xy for c in goals])
    lo = np.array(env.bounds[:2])
    span = np.array([env.width, env.height])
    clock = _Clock(deadline)
    B = params.branching
    for _ in range(max_iterations):
        clock.tick()
        if rng.random() < params.goal_bias:
            q = np.concatenate([gpos, np.full((n, 1), np.nan)], axis=1)
        else:
            u = rng.random((n, 3))
            q = np.concatenate([lo + u[:, :2] * span, (math.pi - 2.0 * math.pi * u[:, 2])[:, None]], axis=1)
        states = nodes.data[: nodes.n].reshape(nodes.n, n, 3)
        dist = np.hypot(states[:, :, 0] - q[:, 0], states[:, :, 1] - q[:, 1])
        if not np.isnan(q[0, 2]):
            dth = np.fmod(np.abs(states[:, :, 2] - q[:, 2]), 2.0 * math.pi)
            dist = dist + hw * np.where(dth > math.pi, 2.0 * math.pi - dth, dth)
        i = int(np.argmin(dist.sum(axis=1)))
        x = states[i]
        u = rng.random((2, B, n))
        vs = vmax * (2.0 * u[0] - 1.0)
        ws = wmax * (2.0 * u[1] - 1.0)
        at = np.array([reached_goal(params, x[k : k + 1], goals[k])[0] for k in range(n)])
        if at.any():
            hold = rng.random(B) < 0.5
            vs[np.ix_(hold, at)] = 0.0
            ws[np.ix_(hold, at)] = 0.0
        rolls = np.empty((B, ns + 1, n, 3))
        valid = np.ones(B, dtype=bool)
        for k in range(n):
            rk = kernels.rk4_unicycle(x[k, 0], x[k, 1], x[k, 2], np.ascontiguousarray(vs[:, k]), np.ascontiguousarray(ws[:, k]), h, ns)
            rolls[:, :, k, :] = rk
            valid &= ~kernels.chains_hits(np.ascontiguousarray(rk[:, :, :2]), rad_static[k], env.obstacle_array, env.bounds_array)
        if n > 1 and valid.any():
            p = rolls[..., :2]
            d = p[:, :, :, None, :] - p[:, :, None, :, :]
            d2 = (d * d).sum(-1)[:, :, iu[0], iu[1]]
            valid &= ~(d2 <= pair_lim[iu] ** 2).any(axis=(1, 2))
        if not valid.any():
            continue
        end = rolls[:, -1]
        cost = np.hypot(end[:, :, 0] - q[:, 0], end[:, :, 1] - q[:, 1]).sum(axis=1)
        cost[~valid] = np.inf
        b = int(np.argmin(cost))
        hit = all_at_goal(rolls[b, 1:])
        if hit.any():
            j = int(np.argmax(hit)) + 1
            nodes.add(rolls[b, j].reshape(-1), i)
            ctrl.append(np.stack([vs[b], ws[b], np.full(n, j * h)], axis=1))
            chain = nodes.chain(nodes.n - 1)
            return [
                KinodynamicTrajectory(k, s0[k], np.array([ctrl[c][k] for c in chain[1:]]), h)
                for k in range(n)
            ]
        nodes.add(rolls[b, -1].reshape(-1), i)
        ctrl.append(np.stack([vs[b], ws[b], np.full(n, params.dt_prop)], axis=1))
    raise BudgetExhausted(f"composite search exhausted {max_iterations} iterations")


def composite_rrt(problem: Problem, params: GuidanceParams, rng, *, deadline: float | None = None,
                  max_iterations: int = 200000) -> list[Trajectory]:
    fn = composite_rrt_kinodynamic if problem.kinodynamic else composite_rrt_geometric
    return fn(problem, params, rng, deadline=deadline, max_iterations=max_iterations)


def retry_order(n: int, rng) -> list[int] | None:
    """A random permutation different from the identity (``None`` for one robot)."""
    if n < 2:
        return None
    while True:
        perm = [int(v) for v in rng.permutation(n)]
        if perm != list(range(n)):
            return perm


def run_fallback(
    problem: Problem,
    params: GuidanceParams,
    rng,
    *,
    deadline: float,
    decoupled_fraction: float = 0.25,
    dt_check: float = DT_CHECK,
    composite_iterations: int = 200000,
    events: list | None = None,
) -> tuple[list[Trajectory], str]:
    """Prioritized planning (input order, then one random order) within
    ``decoupled_fraction`` of the remaining time, then composite RRT.

    Returns the trajectories and the name of the stage that produced them.
    """
    events = [] if events is None else events
    now = time.perf_counter()
    dec_deadline = now + decoupled_fraction * max(deadline - now, 0.0)
    orders = [list(range(problem.n))]
    alt = retry_order(problem.n, rng)
    if alt is not None:
        orders.append(alt)
    for order in orders:
        try:
            trajs = prioritized_decoupled_rrt(problem, order, params, rng, deadline=dec_deadline, dt_check=dt_check)
            events.append({"stage": "prioritized", "order": order, "outcome": "success"})
            return trajs, "prioritized"
        except RobotFailure as exc:
            events.append({"stage": "prioritized", "order": order, "outcome": "failure", "robot": exc.robot})
        except PlannerTimeout:
            events.append({"stage": "prioritized", "order": order, "outcome": "timeout"})
            break
    try:
        trajs = composite_rrt(problem, params, rng, deadline=deadline, max_iterations=composite_iterations)
    except PlannerError as exc:
        events.append({"stage": "composite", "outcome": "timeout" if isinstance(exc, PlannerTimeout) else "failure"})
        raise
    events.append({"stage": "composite", "outcome": "success"})
    return trajs, "composite"
