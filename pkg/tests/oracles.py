"""Independent reference implementations used as test oracles."""

import heapq
import itertools

import numpy as np

from cipher.decomposition import RegionGraph


def joint_state_optimum(g: RegionGraph, starts, goals, capacity=1):
    """Sum-of-costs optimum by Dijkstra over joint states.

    A state is (positions, finished mask). Every unfinished robot pays 1 per
    step; a robot standing on its goal may finish for free and then never
    moves again. Cells hold at most ``capacity`` robots; swaps are forbidden.
    Returns None when no joint plan exists.
    """
    n = len(starts)
    start = (tuple(starts), (False,) * n)
    dist = {start: 0}
    heap = [(0, 0, start)]
    tick = itertools.count(1)
    while heap:
        d, _, state = heapq.heappop(heap)
        if d > dist.get(state, float("inf")):
            continue
        pos, done = state
        if all(done):
            return d
        # free finishing moves
        for i in range(n):
            if not done[i] and pos[i] == goals[i]:
                nd = done[:i] + (True,) + done[i + 1:]
                ns = (pos, nd)
                if d < dist.get(ns, float("inf")):
                    dist[ns] = d
                    heapq.heappush(heap, (d, next(tick), ns))
        options = [((pos[i],) if done[i] else (pos[i],) + tuple(g.adj[pos[i]])) for i in range(n)]
        step_cost = sum(not x for x in done)
        if step_cost == 0:
            continue
        for nxt in itertools.product(*options):
            if max(nxt.count(c) for c in nxt) > capacity:
                continue
            swap = any(
                nxt[i] == pos[j] and nxt[j] == pos[i] and pos[i] != pos[j]
                for i in range(n) for j in range(i + 1, n)
            )
            if swap:
                continue
            ns = (tuple(nxt), done)
            nd = d + step_cost
            if nd < dist.get(ns, float("inf")):
                dist[ns] = nd
                heapq.heappush(heap, (nd, next(tick), ns))
    return None


def random_grid_instance(seed: int, max_side: int = 3, max_robots: int = 2):
    rng = np.random.default_rng(seed)
    cols, rows = (int(v) for v in rng.integers(1, max_side + 1, 2))
    cells = [(i, j) for i in range(cols) for j in range(rows)]
    blocked = {c for c in cells if rng.random() < 0.2}
    free = [c for c in cells if c not in blocked]
    n = int(rng.integers(1, max_robots + 1))
    if len(free) < n:
        blocked = set()
        free = cells
        n = min(n, len(free))
    g = RegionGraph.grid(cols, rows, blocked)
    pick = lambda: [((free[k]),) for k in rng.choice(len(free), n, replace=False)]  # noqa: E731
    starts, goals = pick(), pick()
    return g, starts, goals


def shapely_clear(env, pts, r):
    """Swept-disc clearance of a polyline, checked with shapely distances.

    Touching an obstacle or the boundary counts as a collision.
    """
    from shapely.geometry import LineString, Point, box

    pts = [tuple(map(float, p[:2])) for p in pts]
    geom = Point(pts[0]) if len(set(pts)) == 1 else LineString(pts)
    if any(geom.distance(box(*o)) <= r for o in env.obstacles):
        return False
    x0, y0, x1, y1 = geom.bounds
    b = env.bounds
    return x0 - r > b[0] and y0 - r > b[1] and x1 + r < b[2] and y1 + r < b[3]


def sampled_clear(env, traj, r, dt=0.01):
    """Static clearance of any trajectory by dense time sampling."""
    import numpy as np

    ts = np.append(np.arange(0.0, traj.duration, dt), traj.duration)
    return all(shapely_clear(env, [p], r) for p in traj.positions_at(ts))


def min_separation(a, b, dt=0.01):
    import numpy as np

    horizon = max(a.duration, b.duration)
    ts = np.append(np.arange(0.0, horizon, dt), horizon)
    return float(np.hypot(*(a.positions_at(ts) - b.positions_at(ts)).T).min())
