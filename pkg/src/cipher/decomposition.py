"""Refinable grid decomposition of the workspace and its region graph.

Cells are identified by a path of index pairs: the first pair ``(i, j)`` is
the base-grid column (along x) and row (along y); every further pair in
``{0, 1}^2`` picks a quadrant of a 2x2 split of the previous cell. A cell is
half-open, ``[xmin, xmax) x [ymin, ymax)``, except on the workspace's max
edges, which are closed.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

from .geometry import Environment, Rect, as_config, rect_intersection, union_area

CellId = tuple[tuple[int, int], ...]

DUMP_SCHEMA = "cipher.decomposition/1"


class ResolutionTooFine(ValueError):
    """Base grid cells would be smaller than the minimum cell side."""


class OutOfBounds(ValueError):
    """A projected point lies outside the workspace bounds."""


@dataclass(frozen=True)
class Cell:
    id: CellId
    rect: Rect
    occupied: bool
    overlap: float

    @property
    def depth(self) -> int:
        return len(self.id) - 1

    @property
    def base(self) -> tuple[int, int]:
        return self.id[0]

    @property
    def area(self) -> float:
        r = self.rect
        return (r[2] - r[0]) * (r[3] - r[1])

    @property
    def center(self) -> tuple[float, float]:
        r = self.rect
        return ((r[0] + r[2]) / 2.0, (r[1] + r[3]) / 2.0)


def _overlap_fraction(env: Environment, rect: Rect) -> float:
    parts = [rect_intersection(o, rect) for o in env.obstacles]
    area = (rect[2] - rect[0]) * (rect[3] - rect[1])
    return min(1.0, union_area(p for p in parts if p is not None) / area)


def _children(rect: Rect) -> list[tuple[tuple[int, int], Rect]]:
    x0, y0, x1, y1 = rect
    mx = (x0 + x1) / 2.0
    my = (y0 + y1) / 2.0
    return [
        ((0, 0), (x0, y0, mx, my)),
        ((0, 1), (x0, my, mx, y1)),
        ((1, 0), (mx, y0, x1, my)),
        ((1, 1), (mx, my, x1, y1)),
    ]


class Decomposition:
    """Leaf-cell tiling of the workspace. Treated as immutable; :func:`refine`
    returns a new instance."""

    def __init__(
        self,
        env: Environment,
        l: int,
        threshold: float,
        min_cell_side: float,
        leaves: Mapping[CellId, Cell],
        internal: Mapping[CellId, Rect],
        applied: Mapping[CellId, int] | None = None,
    ):
        self.env = env
        self.l = l
        self.threshold = threshold
        self.min_cell_side = min_cell_side
        self.leaves: dict[CellId, Cell] = dict(sorted(leaves.items()))
        self.internal: dict[CellId, Rect] = dict(internal)
        # per-cell depth actually applied by the refine() call that produced this instance
        self.applied: dict[CellId, int] = dict(applied or {})
        b = env.bounds
        self.xs = [b[0] + (b[2] - b[0]) * i / l for i in range(l)] + [b[2]]
        self.ys = [b[1] + (b[3] - b[1]) * j / l for j in range(l)] + [b[3]]
        self._by_base: dict[tuple[int, int], list[CellId]] = {}
        for cid in self.leaves:
            self._by_base.setdefault(cid[0], []).append(cid)
        self._touch: dict[CellId, tuple[CellId, ...]] = {}
        self._eps = 1e-9 * max(env.width, env.height)

    # basic access ----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.leaves)

    def __iter__(self):
        return iter(self.leaves)

    def __contains__(self, cid) -> bool:
        return cid in self.leaves

    def cell(self, cid: CellId) -> Cell:
        return self.leaves[cid]

    def rect(self, cid: CellId) -> Rect:
        if cid in self.leaves:
            return self.leaves[cid].rect
        return self.internal[cid]

    @property
    def base_side(self) -> float:
        return min(self.env.width, self.env.height) / self.l

    def signature(self) -> tuple[CellId, ...]:
        return tuple(self.leaves)

    def occupied_cells(self) -> list[CellId]:
        return [c for c, cell in self.leaves.items() if cell.occupied]

    def min_leaf_side(self) -> float:
        return min(min(c.rect[2] - c.rect[0], c.rect[3] - c.rect[1]) for c in self.leaves.values())

    # projection ------------------------------------------------------------

    def _base_index(self, v: float, edges: list[float]) -> int:
        n = len(edges) - 1
        i = int((v - edges[0]) / (edges[-1] - edges[0]) * n)
        i = min(max(i, 0), n - 1)
        while i > 0 and v < edges[i]:
            i -= 1
        while i < n - 1 and v >= edges[i + 1]:
            i += 1
        return i

    def project(self, p) -> CellId:
        p = as_config(p)
        if not self.env.contains(p.x, p.y):
            raise OutOfBounds(f"({p.x}, {p.y}) outside {self.env.bounds}")
        cid: CellId = ((self._base_index(p.x, self.xs), self._base_index(p.y, self.ys)),)
        while cid not in self.leaves:
            x0, y0, x1, y1 = self.internal[cid]
            a = 1 if p.x >= (x0 + x1) / 2.0 else 0
            b = 1 if p.y >= (y0 + y1) / 2.0 else 0
            cid = cid + ((a, b),)
        return cid

    # adjacency -------------------------------------------------------------

    def _shares_edge(self, r: Rect, s: Rect) -> bool:
        eps = self._eps
        if abs(r[2] - s[0]) <= eps or abs(s[2] - r[0]) <= eps:
            return min(r[3], s[3]) - max(r[1], s[1]) > eps
        if abs(r[3] - s[1]) <= eps or abs(s[3] - r[1]) <= eps:
            return min(r[2], s[2]) - max(r[0], s[0]) > eps
        return False

    def touching(self, cid: CellId) -> tuple[CellId, ...]:
        """All leaves (occupied or not) sharing a positive-length edge with ``cid``."""
        hit = self._touch.get(cid)
        if hit is not None:
            return hit
        r = self.leaves[cid].rect
        i, j = cid[0]
        out = []
        for bi, bj in ((i, j), (i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            for other in self._by_base.get((bi, bj), ()):
                if other != cid and self._shares_edge(r, self.leaves[other].rect):
                    out.append(other)
        hit = tuple(sorted(out))
        self._touch[cid] = hit
        return hit

    def neighbors(self, cid: CellId) -> tuple[CellId, ...]:
        return tuple(c for c in self.touching(cid) if not self.leaves[c].occupied)

    def region_graph(self, capacity: int = 1, include: Iterable[CellId] = ()) -> "RegionGraph":
        """Graph over unoccupied leaves; ``include`` forces extra (occupied) leaves in."""
        keep = {c for c, cell in self.leaves.items() if not cell.occupied}
        keep.update(c for c in include if c in self.leaves)
        verts = tuple(sorted(keep))
        adj = {c: tuple(o for o in self.touching(c) if o in keep) for c in verts}
        return RegionGraph(verts, adj, capacity)

    # serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": DUMP_SCHEMA,
            "l": self.l,
            "threshold": self.threshold,
            "min_cell_side": self.min_cell_side,
            "leaves": [
                {
                    "id": [list(p) for p in c.id],
                    "rect": list(c.rect),
                    "depth": c.depth,
                    "occupied": c.occupied,
                    "overlap": c.overlap,
                }
                for c in self.leaves.values()
            ],
        }


def grid_decompose(
    env: Environment, l: int, threshold: float = 0.5, min_cell_side: float = 0.0
) -> Decomposition:
    """Uniform ``l`` x ``l`` grid with occupancy flags set by obstacle-overlap fraction."""
    if l < 1:
        raise ValueError("l must be >= 1")
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    if min(env.width, env.height) / l < min_cell_side:
        raise ResolutionTooFine(
            f"cell side {min(env.width, env.height) / l:g} below minimum {min_cell_side:g}"
        )
    b = env.bounds
    xs = [b[0] + (b[2] - b[0]) * i / l for i in range(l)] + [b[2]]
    ys = [b[1] + (b[3] - b[1]) * j / l for j in range(l)] + [b[3]]
    leaves = {}
    for i in range(l):
        for j in range(l):
            rect = (xs[i], ys[j], xs[i + 1], ys[j + 1])
            frac = _overlap_fraction(env, rect)
            cid = ((i, j),)
            leaves[cid] = Cell(cid, rect, frac >= threshold, frac)
    return Decomposition(env, l, threshold, min_cell_side, leaves, {})


def project(d: Decomposition, p) -> CellId:
    return d.project(p)


def neighbors(d: Decomposition, c: CellId) -> tuple[CellId, ...]:
    return d.neighbors(c)


def refine(d: Decomposition, cells: Iterable[CellId], k: int) -> Decomposition:
    """Split each listed leaf ``k`` times (2x2 per level), clamped at ``min_cell_side``.

    The applied depth per requested cell is available as ``result.applied``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    leaves = dict(d.leaves)
    internal = dict(d.internal)
    applied: dict[CellId, int] = {}
    for cid in sorted(set(cells)):
        if cid not in d.leaves:
            raise KeyError(f"{cid} is not a leaf")
        frontier = [cid]
        depth = 0
        for _ in range(k):
            x0, y0, x1, y1 = leaves[frontier[0]].rect
            if min(x1 - x0, y1 - y0) / 2.0 < d.min_cell_side:
                break
            nxt = []
            for parent in frontier:
                cell = leaves.pop(parent)
                internal[parent] = cell.rect
                for idx, rect in _children(cell.rect):
                    child = parent + (idx,)
                    frac = _overlap_fraction(d.env, rect)
                    leaves[child] = Cell(child, rect, frac >= d.threshold, frac)
                    nxt.append(child)
            frontier = nxt
            depth += 1
        applied[cid] = depth
    return Decomposition(d.env, d.l, d.threshold, d.min_cell_side, leaves, internal, applied)


def expand_region(d: Decomposition, seed: Iterable[CellId], layer: int) -> frozenset[CellId]:
    """Leaves within base-grid Chebyshev distance ``layer`` of the seed cells."""
    seed = frozenset(seed)
    if not seed:
        raise ValueError("seed must be nonempty")
    if layer < 0:
        raise ValueError("layer must be >= 0")
    if layer == 0:
        return seed
    bases = {c[0] for c in seed}
    out = set(seed)
    for cid in d.leaves:
        i, j = cid[0]
        if any(max(abs(i - si), abs(j - sj)) <= layer for si, sj in bases):
            out.add(cid)
    return frozenset(out)


def covers(d: Decomposition, cells: Iterable[CellId]) -> bool:
    cells = set(cells)
    return all(c in cells for c in d.leaves)


def max_expansion(d: Decomposition, seed: Iterable[CellId]) -> int:
    """Smallest layer at which :func:`expand_region` covers every leaf."""
    bases = {c[0] for c in seed}
    return max(
        min(max(abs(i - si), abs(j - sj)) for si, sj in bases)
        for i in range(d.l)
        for j in range(d.l)
    )


@dataclass(frozen=True)
class RegionGraph:
    vertices: tuple[CellId, ...]
    adj: Mapping[CellId, tuple[CellId, ...]]
    capacity: int = 1

    def __contains__(self, c) -> bool:
        return c in self.adj

    def neighbors(self, c: CellId) -> tuple[CellId, ...]:
        return self.adj[c]

    def edges(self) -> list[tuple[CellId, CellId]]:
        return [(a, b) for a in self.vertices for b in self.adj[a] if a < b]

    def distances_from(self, src: CellId) -> dict[CellId, int]:
        dist = {src: 0}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in self.adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    @classmethod
    def grid(cls, cols: int, rows: int, blocked: Iterable[tuple[int, int]] = (), capacity: int = 1) -> "RegionGraph":
        """4-connected ``cols`` x ``rows`` grid graph with base-cell ids."""
        blocked = set(blocked)
        verts = [((i, j),) for i in range(cols) for j in range(rows) if (i, j) not in blocked]
        vs = set(verts)
        adj = {}
        for v in verts:
            i, j = v[0]
            nb = [((i + di, j + dj),) for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1))]
            adj[v] = tuple(sorted(n for n in nb if n in vs))
        return cls(tuple(sorted(verts)), adj, capacity)


def leaf_area_total(d: Decomposition) -> float:
    return math.fsum(c.area for c in d.leaves.values())
