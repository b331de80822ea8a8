"""Escalating conflict resolution.

For one conflict between robots ``a`` and ``b`` the neighbourhood of the
conflict is refined (depth ``k = 1 .. max_refinement``) and grown layer by
layer; after every refinement the two robots get new region paths from CBS,
with all other robots booked into the refined cells along their current
trajectories, and new trajectories that steer around everyone else. The
first attempt that leaves no conflict involving ``a`` or ``b`` is committed.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

from .conflict import DT_CHECK, SEGMENT_LEN, Conflict, detect_conflicts
from .decomposition import CellId, Decomposition, covers, expand_region, max_expansion, refine
from .guided import GuidanceParams, PlannerError
from .mapf import MapfError, RegionPath, Reservations, solve_mapf
from .problem import Problem
from .spacetime import DynamicObstacles, plan_against
from .trajectory import Trajectory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResolutionConfig:
    max_refinement: int = 3
    mapf_budget: float = 2.0  # seconds per MAPF re-solve
    replan_budget: float = 10.0  # seconds per trajectory replan of both robots
    expansion_step: int = 1
    mapf_max_nodes: int = 5000
    samples_per_step: int = 1
    replan_iterations: int = 5000  # per robot, per replan

    def __post_init__(self):
        if self.max_refinement < 1:
            raise ValueError("max_refinement must be >= 1")
        if not (self.mapf_budget > 0 and self.replan_budget > 0):
            raise ValueError("budgets must be positive")
        if self.expansion_step < 1 or self.samples_per_step < 1:
            raise ValueError("expansion_step and samples_per_step must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PlanState:
    """Mutable plan set of one planning invocation."""

    d: Decomposition
    paths: list[RegionPath]
    trajs: list[Trajectory]
    events: list[dict] = field(default_factory=list)


@dataclass
class ResolutionContext:
    problem: Problem
    params: GuidanceParams
    rng: object
    capacity: int
    dt_check: float = DT_CHECK
    segment_len: float = SEGMENT_LEN
    deadline: float | None = None

    def remaining(self) -> float:
        if self.deadline is None:
            return math.inf
        return self.deadline - time.perf_counter()


def expansion_layer(c: Conflict, d: Decomposition) -> int:
    return 0 if d.project(c.pos_a) == d.project(c.pos_b) else 1


def seed_cells(c: Conflict, d: Decomposition) -> frozenset[CellId]:
    return frozenset((d.project(c.pos_a), d.project(c.pos_b)))


def background_reservations(
    d: Decomposition, trajs: list[Trajectory], speed: float, samples_per_step: int = 1
) -> Reservations:
    """Book robots into cells of ``d`` along their trajectories.

    One region-path step lasts ``base cell side / speed``; a robot occupies
    every cell it is seen in at ``samples_per_step`` instants of the step.
    """
    res = Reservations()
    if not trajs:
        return res
    step = d.base_side / max(speed, 1e-9)
    lasts = [int(math.ceil(t.duration / step - 1e-9)) for t in trajs]
    horizon = max(lasts)
    for tr, last in zip(trajs, lasts):
        for k in range(last + 1):
            ts = [min((k + s / samples_per_step) * step, tr.duration) for s in range(samples_per_step)]
            cells = {d.project(p) for p in tr.positions_at(ts)}
            for c in cells:
                res.counts[(c, k)] += 1
        final = d.project(tr.positions_at([tr.duration])[0])
        for k in range(last + 1, horizon + 1):
            res.counts[(final, k)] += 1
        res.rest[final] += 1
    res.horizon = horizon
    return res


def _replan_pair(
    ctx: ResolutionContext,
    state: PlanState,
    pair: tuple[int, int],
    paths: dict[int, RegionPath],
    wd: Decomposition,
    budget: float,
    iterations: int,
) -> dict[int, Trajectory] | None:
    """Space-time guided replans of both robots, everyone else held fixed.

    Tries ``pair`` in both priority orders.
    """
    p = ctx.problem
    others = [j for j in range(p.n) if j not in pair]
    params = ctx.params.with_(max_iterations=iterations)
    for order in (pair, pair[::-1]):
        deadline = time.perf_counter() + budget
        if ctx.deadline is not None:
            deadline = min(deadline, ctx.deadline)
        committed = {j: state.trajs[j] for j in others}
        try:
            for i in order:
                keys = sorted(committed)
                obstacles = DynamicObstacles(
                    [committed[j] for j in keys], [p.robots[j].radius for j in keys], ctx.dt_check
                )
                committed[i] = plan_against(
                    p.robots[i], p.starts[i], p.goals[i], p.env, obstacles, params, ctx.rng,
                    robot_index=i, path=paths[i], decomposition=wd, deadline=deadline,
                )
        except PlannerError as exc:
            state.events.append({"event": "replan-failed", "order": list(order), "reason": type(exc).__name__})
            continue
        return {i: committed[i] for i in pair}
    return None


def refine_and_replan(
    c: Conflict,
    r_exp,
    k: int,
    state: PlanState,
    ctx: ResolutionContext,
    cfg: ResolutionConfig,
    tried: set | None = None,
) -> bool:
    """One resolution attempt on a working copy; commits only on success."""
    if k < 1:
        raise ValueError("k must be >= 1")
    p = ctx.problem
    a, b = c.robot_a, c.robot_b
    wd = refine(state.d, r_exp, k)
    event = {"event": "attempt", "robots": [a, b], "t": c.t, "region": len(r_exp), "k": k,
             "applied": max(wd.applied.values(), default=0), "leaves": len(wd)}
    sig = wd.signature()
    if tried is not None:
        if sig in tried:
            event["outcome"] = "skipped-duplicate"
            state.events.append(event)
            return False
        tried.add(sig)
    others = [j for j in range(p.n) if j not in (a, b)]
    speed = min(r.speed for r in p.robots)
    res = background_reservations(wd, [state.trajs[j] for j in others], speed, cfg.samples_per_step)
    include = {wd.project(s) for s in p.starts} | {wd.project(g) for g in p.goals}
    g = wd.region_graph(ctx.capacity, include)
    budget = max(min(cfg.mapf_budget, ctx.remaining()), 1e-3)
    try:
        new_paths = solve_mapf(
            g, [wd.project(p.starts[a]), wd.project(p.starts[b])],
            [wd.project(p.goals[a]), wd.project(p.goals[b])],
            ctx.capacity, budget, reservations=res, robot_ids=[a, b], max_nodes=cfg.mapf_max_nodes,
        )
    except MapfError as exc:
        event["outcome"] = "mapf-" + type(exc).__name__
        state.events.append(event)
        return False
    paths = {rp.robot: rp for rp in new_paths}
    trajs = _replan_pair(ctx, state, (a, b), paths, wd, cfg.replan_budget, cfg.replan_iterations)
    if trajs is None:
        event["outcome"] = "replan-failed"
        state.events.append(event)
        return False
    candidate = list(state.trajs)
    for i, tr in trajs.items():
        candidate[i] = tr
    left = detect_conflicts(candidate, p.robots, ctx.dt_check, ctx.segment_len, involving=(a, b))
    if left:
        event["outcome"] = "conflicts-remain"
        state.events.append(event)
        return False
    state.d = wd
    for i in (a, b):
        state.paths[i] = paths[i]
        state.trajs[i] = trajs[i]
    event["outcome"] = "committed"
    state.events.append(event)
    return True


def resolve_conflict(
    c: Conflict, state: PlanState, ctx: ResolutionContext, cfg: ResolutionConfig
) -> bool:
    """Escalate over expansion layers and refinement depths until an attempt succeeds."""
    d = state.d
    seed = seed_cells(c, d)
    first = expansion_layer(c, d)
    last = max(max_expansion(d, seed), first)
    layers = list(range(first, last + 1, cfg.expansion_step))
    if layers[-1] != last:
        layers.append(last)
    tried: set = set()
    for layer in layers:
        r_exp = expand_region(d, seed, layer)
        for k in range(1, cfg.max_refinement + 1):
            if ctx.remaining() <= 0:
                return False
            if refine_and_replan(c, r_exp, k, state, ctx, cfg, tried):
                state.events[-1]["layer"] = layer
                return True
        if covers(d, r_exp):
            break
    return False


def max_attempts(c: Conflict, d: Decomposition, cfg: ResolutionConfig) -> int:
    seed = seed_cells(c, d)
    first = expansion_layer(c, d)
    last = max(max_expansion(d, seed), first)
    layers = len(range(first, last + 1, cfg.expansion_step))
    if (last - first) % cfg.expansion_step:
        layers += 1
    return layers * cfg.max_refinement


__all__ = [
    "ResolutionConfig",
    "PlanState",
    "ResolutionContext",
    "expansion_layer",
    "resolve_conflict",
    "refine_and_replan",
    "background_reservations",
    "max_attempts",
]
