"""Conflict-Based Search over the region graph, with per-cell capacities.

Robots that finish their path keep occupying their final cell. Swaps along
an edge within one timestep are always forbidden, whatever the capacity.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .decomposition import CellId, RegionGraph

log = logging.getLogger(__name__)


class MapfError(RuntimeError):
    pass


class MapfInfeasible(MapfError):
    pass


class MapfTimeout(MapfError):
    pass


@dataclass(frozen=True)
class RegionPath:
    robot: int
    cells: tuple[CellId, ...]

    @property
    def cost(self) -> int:
        return len(self.cells) - 1

    def at(self, t: int) -> CellId:
        return self.cells[min(t, len(self.cells) - 1)]

    def to_dict(self) -> dict:
        return {"robot": self.robot, "cells": [[list(p) for p in c] for c in self.cells]}

    @classmethod
    def from_dict(cls, data: dict) -> "RegionPath":
        return cls(data["robot"], tuple(tuple(tuple(p) for p in c) for c in data["cells"]))


@dataclass(frozen=True)
class MapfConstraint:
    robot: int
    cell: CellId
    timestep: int
    kind: str = "vertex"
    from_cell: CellId | None = None

    def __post_init__(self):
        if self.timestep < 0:
            raise ValueError("timestep must be >= 0")
        if self.kind not in ("vertex", "edge"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "edge" and self.from_cell is None:
            raise ValueError("edge constraints need from_cell")


@dataclass(frozen=True)
class MapfConflict:
    kind: str  # "vertex" | "edge"
    timestep: int
    cell: CellId
    robots: tuple[int, ...]
    # edge conflicts: robots[0] moves from_cell -> cell, robots[1] moves cell -> from_cell
    from_cell: CellId | None = None


@dataclass
class Reservations:
    """Time-indexed cell occupancy by robots outside the search.

    ``counts[(cell, t)]`` robots occupy ``cell`` at step ``t`` for
    ``t <= horizon``; afterwards ``rest[cell]`` robots stay forever.
    """

    counts: Counter = field(default_factory=Counter)
    rest: Counter = field(default_factory=Counter)
    horizon: int = -1

    def count(self, cell: CellId, t: int) -> int:
        if t > self.horizon:
            return self.rest.get(cell, 0)
        return self.counts.get((cell, t), 0)

    def cells_at(self, t: int):
        if t > self.horizon:
            return self.rest.items()
        return ((c, n) for (c, tt), n in self.counts.items() if tt == t)


def _trim(cells: list[CellId]) -> tuple[CellId, ...]:
    while len(cells) > 1 and cells[-1] == cells[-2]:
        cells.pop()
    return tuple(cells)


def low_level_search(
    g: RegionGraph,
    start: CellId,
    goal: CellId,
    constraints: Sequence[MapfConstraint] = (),
    *,
    robot: int = 0,
    horizon: int | None = None,
    reservations: Reservations | None = None,
    capacity: int | None = None,
    h: dict[CellId, int] | None = None,
) -> RegionPath | None:
    """Space-time A* with unit move/wait costs. Returns ``None`` if no path
    exists within the horizon.

    Ties on f are broken by smaller heuristic, then fewer waits, then the
    lexicographically smaller cell id.
    """
    if start not in g or goal not in g:
        raise KeyError("start and goal must be vertices of the region graph")
    if h is None:
        h = g.distances_from(goal)
    if start not in h:
        return None
    cap = g.capacity if capacity is None else capacity
    vcon = set()
    econ = set()
    goal_block = -1
    for c in constraints:
        if c.robot != robot:
            continue
        if c.kind == "vertex":
            vcon.add((c.cell, c.timestep))
            if c.cell == goal:
                goal_block = max(goal_block, c.timestep)
        else:
            econ.add((c.from_cell, c.cell, c.timestep))
    if reservations is not None:
        # a goal is final only once reserved occupancy there stays below capacity
        for t in range(reservations.horizon, -1, -1):
            if reservations.count(goal, t) >= cap:
                goal_block = max(goal_block, t)
                break
        if reservations.rest.get(goal, 0) >= cap:
            return None
    if horizon is None:
        horizon = 4 * (len(g.vertices) + h[start])
        if reservations is not None:
            horizon += reservations.horizon + 1
    horizon = max(horizon, goal_block + 1)
    if (start, 0) in vcon:
        return None

    tick = itertools.count()
    # (f, h, waits, cell, t, seq, parent_key)
    heap = [(h[start], h[start], 0, start, 0, next(tick), None)]
    parent: dict[tuple[CellId, int], tuple[CellId, int] | None] = {}
    while heap:
        f, hh, waits, cell, t, _, par = heapq.heappop(heap)
        key = (cell, t)
        if key in parent:
            continue
        parent[key] = par
        if cell == goal and t > goal_block:
            out = []
            k = key
            while k is not None:
                out.append(k[0])
                k = parent[k]
            out.reverse()
            return RegionPath(robot, _trim(out))
        if t >= horizon:
            continue
        nt = t + 1
        for nxt in (cell,) + tuple(g.adj[cell]):
            if nxt not in h:
                continue
            if (nxt, nt) in parent or (nxt, nt) in vcon:
                continue
            if nxt != cell and (cell, nxt, nt) in econ:
                continue
            if reservations is not None and reservations.count(nxt, nt) >= cap:
                continue
            nh = h[nxt]
            heapq.heappush(heap, (nt + nh, nh, waits + (nxt == cell), nxt, nt, next(tick), key))
    return None


def find_first_mapf_conflict(
    paths: Sequence[RegionPath],
    capacity: int = 1,
    *,
    reservations: Reservations | None = None,
    start_time: int = 0,
) -> MapfConflict | None:
    """Earliest capacity overflow or swap. Vertex checks at ``t`` precede swap
    checks on the step ``t -> t + 1``."""
    if not paths:
        raise ValueError("paths must be nonempty")
    last = max(len(p.cells) for p in paths) - 1
    if reservations is not None:
        last = max(last, reservations.horizon + 1)
    for t in range(start_time, last + 1):
        occ: dict[CellId, list[int]] = {}
        for p in paths:
            occ.setdefault(p.at(t), []).append(p.robot)
        bad = []
        for cell, robots in occ.items():
            extra = reservations.count(cell, t) if reservations is not None else 0
            if len(robots) + extra > capacity:
                bad.append(cell)
        if bad:
            cell = min(bad)
            return MapfConflict("vertex", t, cell, tuple(sorted(occ[cell])))
        if t == last:
            break
        moves = {}
        for p in paths:
            a, b = p.at(t), p.at(t + 1)
            if a != b:
                moves[(a, b)] = p.robot
        swaps = []
        for (a, b), r in moves.items():
            other = moves.get((b, a))
            if other is not None and r < other:
                swaps.append((b, a, r, other))
        if swaps:
            cell, frm, r1, r2 = min(swaps)
            return MapfConflict("edge", t + 1, cell, (r1, r2), from_cell=frm)
    return None


@dataclass
class _Node:
    cost: int
    seq: int
    constraints: tuple[MapfConstraint, ...]
    paths: list[RegionPath]

    def __lt__(self, other):
        return (self.cost, self.seq) < (other.cost, other.seq)


def solve_mapf(
    g: RegionGraph,
    starts: Sequence[CellId],
    goals: Sequence[CellId],
    capacity: int | None = None,
    time_budget: float | None = None,
    *,
    reservations: Reservations | None = None,
    robot_ids: Sequence[int] | None = None,
    max_nodes: int = 20000,
    trace: list | None = None,
) -> list[RegionPath]:
    """Sum-of-costs optimal CBS.

    Raises :class:`MapfInfeasible` when some robot cannot reach its goal or
    the constraint tree is exhausted, :class:`MapfTimeout` when the wall-clock
    budget or node limit is hit. ``trace`` collects one entry per expanded
    constraint-tree node.
    """
    if len(starts) != len(goals):
        raise ValueError("starts and goals differ in length")
    cap = g.capacity if capacity is None else capacity
    ids = list(range(len(starts))) if robot_ids is None else list(robot_ids)
    deadline = None if time_budget is None else time.perf_counter() + time_budget
    hs = {}
    for s, gl in zip(starts, goals):
        if s not in g or gl not in g:
            raise MapfInfeasible("start or goal is not a region-graph vertex")
        if gl not in hs:
            hs[gl] = g.distances_from(gl)
        if s not in hs[gl]:
            raise MapfInfeasible(f"goal {gl} unreachable from {s}")
    lb = max(hs[gl][s] for s, gl in zip(starts, goals))
    horizon = 4 * (len(g.vertices) + lb)
    if reservations is not None:
        horizon += reservations.horizon + 1
    start_time = 1 if reservations is not None else 0
    idx = {r: k for k, r in enumerate(ids)}

    def plan(k: int, cons) -> RegionPath | None:
        return low_level_search(
            g, starts[k], goals[k], cons, robot=ids[k], horizon=horizon,
            reservations=reservations, capacity=cap, h=hs[goals[k]],
        )

    root_paths = []
    for k in range(len(ids)):
        p = plan(k, ())
        if p is None:
            raise MapfInfeasible(f"robot {ids[k]} has no path")
        root_paths.append(p)
    seq = itertools.count()
    open_ = [_Node(sum(p.cost for p in root_paths), next(seq), (), root_paths)]
    expanded = 0
    while open_:
        if deadline is not None and time.perf_counter() > deadline:
            raise MapfTimeout("MAPF time budget exhausted")
        if expanded >= max_nodes:
            raise MapfTimeout("MAPF node limit reached")
        node = heapq.heappop(open_)
        expanded += 1
        conflict = find_first_mapf_conflict(
            node.paths, cap, reservations=reservations, start_time=start_time
        )
        if trace is not None:
            trace.append({"cost": node.cost, "constraints": len(node.constraints), "conflict": conflict})
        if log.isEnabledFor(logging.DEBUG):
            log.debug("CT node cost=%d |C|=%d conflict=%s", node.cost, len(node.constraints), conflict)
        if conflict is None:
            return node.paths
        if conflict.kind == "vertex":
            branches = [
                MapfConstraint(r, conflict.cell, conflict.timestep) for r in conflict.robots
            ]
        else:
            r1, r2 = conflict.robots
            branches = [
                MapfConstraint(r1, conflict.cell, conflict.timestep, "edge", conflict.from_cell),
                MapfConstraint(r2, conflict.from_cell, conflict.timestep, "edge", conflict.cell),
            ]
        for con in branches:
            cons = node.constraints + (con,)
            k = idx[con.robot]
            p = plan(k, cons)
            if p is None:
                continue
            paths = list(node.paths)
            paths[k] = p
            heapq.heappush(open_, _Node(sum(q.cost for q in paths), next(seq), cons, paths))
    raise MapfInfeasible("constraint tree exhausted")


def capacity_needed(starts: Sequence[CellId], goals: Sequence[CellId]) -> int:
    """Smallest capacity admitting the given start and goal placements."""
    return max(max(Counter(starts).values()), max(Counter(goals).values()))
