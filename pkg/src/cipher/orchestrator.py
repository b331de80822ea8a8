"""End-to-end planners behind one interface.

``plan_cipher``: decompose, route with CBS, plan each robot along its region
path, detect conflicts, resolve them one at a time (earliest first), and
fall back to prioritized then composite planning if conflicts remain.
``plan_pprg``: decompose, route, then guided prioritized planning with no
conflict handling. ``plan_baseline``: unguided decoupled or coupled RRT.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .conflict import DT_CHECK, SEGMENT_LEN, detect_conflicts
from .decomposition import Decomposition, ResolutionTooFine, grid_decompose
from .fallback import (
    RobotFailure,
    composite_rrt,
    prioritized_decoupled_rrt,
    run_fallback,
)
from .guided import GuidanceParams, PlannerError, PlannerTimeout, guided_rrt_connect, kinodynamic_guided_rrt
from .mapf import MapfError, MapfTimeout, RegionPath, capacity_needed, solve_mapf
from .problem import PlanResult, Problem
from .resolution import PlanState, ResolutionConfig, ResolutionContext, resolve_conflict

log = logging.getLogger(__name__)

PLANNERS = ("cipher", "pprg", "decoupled", "coupled")


@dataclass(frozen=True)
class PlannerConfig:
    region_factor: float = 5.0
    occupancy_threshold: float = 0.5
    capacity: int = 1
    min_cell_factor: float = 1.05
    dt_check: float = DT_CHECK
    segment_len: float = SEGMENT_LEN
    mapf_budget: float = 10.0
    mapf_max_nodes: int = 20000
    decoupled_fraction: float = 0.25
    composite_iterations: int = 200000
    resolve_cap_factor: int = 2  # at most factor * n resolve_conflict calls
    guidance: GuidanceParams = field(default_factory=GuidanceParams)
    resolution: ResolutionConfig = field(default_factory=ResolutionConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PlannerConfig":
        data = dict(data)
        if "guidance" in data:
            data["guidance"] = GuidanceParams(**data["guidance"])
        if "resolution" in data:
            data["resolution"] = ResolutionConfig(**data["resolution"])
        return cls(**data)


def base_resolution(p: Problem, cfg: PlannerConfig) -> int:
    """Cells per axis so that a base cell is about ``region_factor`` robot diameters."""
    diam = max(r.diameter for r in p.robots)
    side = min(p.env.width, p.env.height)
    l = max(1, int(math.floor(side / (cfg.region_factor * diam))))
    # never below the minimum cell side
    l_max = max(1, int(math.floor(side / (cfg.min_cell_factor * diam))))
    return min(l, l_max)


def decompose_for(p: Problem, cfg: PlannerConfig) -> Decomposition:
    diam = max(r.diameter for r in p.robots)
    l = base_resolution(p, cfg)
    try:
        return grid_decompose(p.env, l, cfg.occupancy_threshold, cfg.min_cell_factor * diam)
    except ResolutionTooFine:
        return grid_decompose(p.env, 1, cfg.occupancy_threshold, 0.0)


def route(p: Problem, d: Decomposition, cfg: PlannerConfig, deadline: float) -> tuple[list[RegionPath], int]:
    starts = [d.project(s) for s in p.starts]
    goals = [d.project(g) for g in p.goals]
    cap = max(cfg.capacity, capacity_needed(starts, goals))
    g = d.region_graph(cap, include=set(starts) | set(goals))
    budget = max(min(cfg.mapf_budget, deadline - time.perf_counter()), 1e-3)
    paths = solve_mapf(g, starts, goals, cap, budget, max_nodes=cfg.mapf_max_nodes)
    return paths, cap


class _Run:
    """Bookkeeping shared by all planners."""

    def __init__(self, name: str, p: Problem, cfg: PlannerConfig):
        p.check()
        self.name = name
        self.p = p
        self.cfg = cfg
        self.t0 = time.perf_counter()
        self.deadline = self.t0 + p.time_limit
        self.rng = np.random.default_rng(p.seed)
        self.phases: dict[str, float] = {}
        self._mark = self.t0
        self.stats: dict = {"n": p.n, "fallback": None}
        self.events: list = []
        self.conflicts: list = []
        self.decomposition: Decomposition | None = None

    def phase(self, name: str) -> None:
        now = time.perf_counter()
        self.phases[name] = self.phases.get(name, 0.0) + now - self._mark
        self._mark = now

    def expired(self) -> bool:
        return time.perf_counter() > self.deadline

    def result(self, status: str, trajs=None) -> PlanResult:
        wall = time.perf_counter() - self.t0
        if status == "success" and wall > self.p.time_limit:
            # a plan delivered after the deadline does not count
            status, trajs = "timeout", None
        d = self.decomposition
        if d is not None:
            self.stats["leaves"] = len(d)
            self.stats["l"] = d.l
            self.stats["min_leaf_side"] = d.min_leaf_side()
            self.stats["min_cell_side"] = d.min_cell_side
        return PlanResult(
            status=status,
            planner=self.name,
            trajectories=list(trajs or []),
            stats=self.stats,
            timing={"wall_time": wall, "phases": self.phases},
            seed=self.p.seed,
            config={"planner": self.name, "time_limit": self.p.time_limit, **self.cfg.to_dict()},
            conflicts=self.conflicts,
            events=self.events,
            decomposition=None if d is None else d.to_dict(),
        )


def _guided_plan(run: _Run, d: Decomposition, paths: list[RegionPath]):
    p = run.p
    params = run.cfg.guidance
    out = []
    for i in range(p.n):
        fn = kinodynamic_guided_rrt if p.kinodynamic else guided_rrt_connect
        out.append(fn(p.robots[i], p.starts[i], p.goals[i], p.env, paths[i], params, run.rng,
                      decomposition=d, robot_index=i, deadline=run.deadline))
    return out


def _fallback(run: _Run) -> PlanResult:
    cfg = run.cfg
    if run.expired():
        return run.result("timeout")
    try:
        trajs, stage = run_fallback(
            run.p, cfg.guidance, run.rng, deadline=run.deadline, decoupled_fraction=cfg.decoupled_fraction,
            dt_check=cfg.dt_check, composite_iterations=cfg.composite_iterations, events=run.events,
        )
    except PlannerTimeout:
        run.phase("fallback")
        return run.result("timeout")
    except PlannerError:
        run.phase("fallback")
        return run.result("failure")
    run.phase("fallback")
    run.stats["fallback"] = stage
    return run.result("success", trajs)


def plan_cipher(p: Problem, cfg: PlannerConfig | None = None) -> PlanResult:
    cfg = cfg or PlannerConfig()
    run = _Run("cipher", p, cfg)
    d = decompose_for(p, cfg)
    run.decomposition = d
    run.phase("decompose")
    run.stats.update(conflicts_initial=0, conflicts_detected=0, resolve_calls=0, resolved=0, refinements=0)
    if run.expired():
        return run.result("timeout")
    try:
        paths, cap = route(p, d, cfg, run.deadline)
    except MapfError as exc:
        run.phase("mapf")
        run.events.append({"event": "mapf-failed", "reason": type(exc).__name__})
        return _fallback(run)
    run.phase("mapf")
    run.stats["mapf_cost"] = sum(q.cost for q in paths)
    if run.expired():
        return run.result("timeout")
    try:
        trajs = _guided_plan(run, d, paths)
    except PlannerTimeout:
        run.phase("guided")
        return run.result("timeout")
    except PlannerError as exc:
        run.phase("guided")
        run.events.append({"event": "guided-failed", "reason": str(exc)})
        return _fallback(run)
    run.phase("guided")
    conflicts = detect_conflicts(trajs, p.robots, cfg.dt_check, cfg.segment_len, decomposition=d)
    run.conflicts = [c.to_dict() for c in conflicts]
    run.stats["conflicts_initial"] = len(conflicts)
    run.stats["conflicts_detected"] = len(conflicts)
    run.phase("detect")
    state = PlanState(d, list(paths), list(trajs), run.events)
    ctx = ResolutionContext(p, cfg.guidance, run.rng, cap, cfg.dt_check, cfg.segment_len, run.deadline)
    cap_calls = cfg.resolve_cap_factor * p.n
    while conflicts and run.stats["resolve_calls"] < cap_calls and not run.expired():
        c = conflicts[0]
        run.stats["resolve_calls"] += 1
        ok = resolve_conflict(c, state, ctx, cfg.resolution)
        run.decomposition = state.d
        if not ok:
            run.events.append({"event": "resolve-failed", "robots": [c.robot_a, c.robot_b], "t": c.t})
            break
        run.stats["resolved"] += 1
        conflicts = detect_conflicts(state.trajs, p.robots, cfg.dt_check, cfg.segment_len, decomposition=state.d)
        run.stats["conflicts_detected"] += len(conflicts)
    run.stats["refinements"] = sum(1 for e in run.events if e.get("outcome") == "committed")
    run.phase("resolve")
    if not conflicts:
        return run.result("success", state.trajs)
    run.stats["conflicts_remaining"] = len(conflicts)
    return _fallback(run)


def plan_pprg(p: Problem, cfg: PlannerConfig | None = None) -> PlanResult:
    cfg = cfg or PlannerConfig()
    run = _Run("pprg", p, cfg)
    d = decompose_for(p, cfg)
    run.decomposition = d
    run.phase("decompose")
    try:
        paths, _ = route(p, d, cfg, run.deadline)
    except MapfTimeout:
        run.phase("mapf")
        return run.result("timeout" if run.expired() else "failure")
    except MapfError:
        run.phase("mapf")
        return run.result("failure")
    run.phase("mapf")
    try:
        trajs = prioritized_decoupled_rrt(
            p, None, cfg.guidance, run.rng, deadline=run.deadline, dt_check=cfg.dt_check,
            paths=paths, decomposition=d,
        )
    except PlannerTimeout:
        run.phase("guided")
        return run.result("timeout")
    except RobotFailure as exc:
        run.phase("guided")
        run.stats["failed_robot"] = exc.robot
        return run.result("failure")
    run.phase("guided")
    return run.result("success", trajs)


def plan_baseline(p: Problem, which: str, cfg: PlannerConfig | None = None) -> PlanResult:
    cfg = cfg or PlannerConfig()
    if which not in ("coupled", "decoupled"):
        raise ValueError(f"unknown baseline {which!r}")
    run = _Run(which, p, cfg)
    try:
        if which == "decoupled":
            trajs = prioritized_decoupled_rrt(p, None, cfg.guidance, run.rng, deadline=run.deadline, dt_check=cfg.dt_check)
        else:
            trajs = composite_rrt(p, cfg.guidance, run.rng, deadline=run.deadline, max_iterations=cfg.composite_iterations)
    except PlannerTimeout:
        run.phase("plan")
        return run.result("timeout")
    except RobotFailure as exc:
        run.phase("plan")
        run.stats["failed_robot"] = exc.robot
        return run.result("failure")
    except PlannerError:
        run.phase("plan")
        return run.result("failure")
    run.phase("plan")
    return run.result("success", trajs)


def plan(p: Problem, planner: str = "cipher", cfg: PlannerConfig | None = None) -> PlanResult:
    if planner == "cipher":
        return plan_cipher(p, cfg)
    if planner == "pprg":
        return plan_pprg(p, cfg)
    if planner in ("coupled", "decoupled"):
        return plan_baseline(p, planner, cfg)
    raise ValueError(f"unknown planner {planner!r}; choose from {PLANNERS}")
