"""Hot numeric kernels.

Every kernel exists twice: a loop version compiled by numba (``_loop_*``) and a
vectorized numpy version (``_np_*``). The public names bind to one of them at
import time according to :data:`cipher._jit.USE_NUMBA`. Both variants follow
the same arithmetic so they agree to rounding; within one backend results are
bit-reproducible.

Array conventions: obstacles are ``(m, 4)`` float arrays of
``[xmin, ymin, xmax, ymax]`` rows, bounds a length-4 array in the same order.
Contact (distance exactly equal to the radius) counts as a collision.
"""

from __future__ import annotations

import math

import numpy as np

from ._jit import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# static collision


def _loop_disc_hits(xs, ys, r, obs, bounds):
    n = xs.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    r2 = r * r
    for i in range(n):
        x = xs[i]
        y = ys[i]
        if x - r <= bounds[0] or y - r <= bounds[1] or x + r >= bounds[2] or y + r >= bounds[3]:
            out[i] = True
            continue
        for j in range(obs.shape[0]):
            dx = max(obs[j, 0] - x, 0.0, x - obs[j, 2])
            dy = max(obs[j, 1] - y, 0.0, y - obs[j, 3])
            if dx * dx + dy * dy <= r2:
                out[i] = True
                break
    return out


def _loop_first_disc_hit(xs, ys, r, obs, bounds):
    r2 = r * r
    for i in range(xs.shape[0]):
        x = xs[i]
        y = ys[i]
        if x - r <= bounds[0] or y - r <= bounds[1] or x + r >= bounds[2] or y + r >= bounds[3]:
            return i
        for j in range(obs.shape[0]):
            dx = max(obs[j, 0] - x, 0.0, x - obs[j, 2])
            dy = max(obs[j, 1] - y, 0.0, y - obs[j, 3])
            if dx * dx + dy * dy <= r2:
                return i
    return -1


def _loop_segment_hits(ax, ay, bx, by, r, step, obs, bounds):
    dist = math.sqrt((bx - ax) ** 2 + (by - ay) ** 2)
    n = max(1, int(math.ceil(dist / step)))
    r2 = r * r
    for i in range(n + 1):
        s = i / n
        x = ax * (1.0 - s) + bx * s
        y = ay * (1.0 - s) + by * s
        if x - r <= bounds[0] or y - r <= bounds[1] or x + r >= bounds[2] or y + r >= bounds[3]:
            return True
        for j in range(obs.shape[0]):
            dx = max(obs[j, 0] - x, 0.0, x - obs[j, 2])
            dy = max(obs[j, 1] - y, 0.0, y - obs[j, 3])
            if dx * dx + dy * dy <= r2:
                return True
    return False


def _np_disc_hits(xs, ys, r, obs, bounds):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    out = (xs - r <= bounds[0]) | (ys - r <= bounds[1]) | (xs + r >= bounds[2]) | (ys + r >= bounds[3])
    if obs.shape[0]:
        x = xs[:, None]
        y = ys[:, None]
        zero = np.zeros((1, 1))
        dx = np.maximum(np.maximum(obs[None, :, 0] - x, zero), x - obs[None, :, 2])
        dy = np.maximum(np.maximum(obs[None, :, 1] - y, zero), y - obs[None, :, 3])
        out |= (dx * dx + dy * dy <= r * r).any(axis=1)
    return out


def _np_first_disc_hit(xs, ys, r, obs, bounds):
    hits = _np_disc_hits(xs, ys, r, obs, bounds)
    idx = np.flatnonzero(hits)
    return int(idx[0]) if idx.size else -1


def _np_segment_hits(ax, ay, bx, by, r, step, obs, bounds):
    dist = math.sqrt((bx - ax) ** 2 + (by - ay) ** 2)
    n = max(1, int(math.ceil(dist / step)))
    s = np.arange(n + 1) / n
    return bool(_np_disc_hits(ax * (1.0 - s) + bx * s, ay * (1.0 - s) + by * s, r, obs, bounds).any())


# ---------------------------------------------------------------------------
# nearest neighbour


def _loop_nearest(pts, n, q):
    best = -1
    best_d = np.inf
    d = pts.shape[1]
    for i in range(n):
        acc = 0.0
        for k in range(d):
            diff = pts[i, k] - q[k]
            acc += diff * diff
        if acc < best_d:
            best_d = acc
            best = i
    return best


def _loop_nearest_se2(states, n, q, w):
    best = -1
    best_d = np.inf
    for i in range(n):
        dx = states[i, 0] - q[0]
        dy = states[i, 1] - q[1]
        da = np.fmod(abs(states[i, 2] - q[2]), 2.0 * math.pi)
        if da > math.pi:
            da = 2.0 * math.pi - da
        dist = math.sqrt(dx * dx + dy * dy) + w * da
        if dist < best_d:
            best_d = dist
            best = i
    return best


def _np_nearest(pts, n, q):
    diff = pts[:n] - q
    acc = diff[:, 0] * diff[:, 0]
    for k in range(1, pts.shape[1]):
        acc = acc + diff[:, k] * diff[:, k]
    return int(np.argmin(acc))


def _np_nearest_se2(states, n, q, w):
    s = states[:n]
    dx = s[:, 0] - q[0]
    dy = s[:, 1] - q[1]
    da = np.fmod(np.abs(s[:, 2] - q[2]), 2.0 * math.pi)
    da = np.where(da > math.pi, 2.0 * math.pi - da, da)
    return int(np.argmin(np.sqrt(dx * dx + dy * dy) + w * da))


# ---------------------------------------------------------------------------
# unicycle integration (classical RK4, fixed step)


def _loop_rk4_unicycle(x0, y0, th0, vs, ws, h, nsteps):
    b = vs.shape[0]
    out = np.empty((b, nsteps + 1, 3))
    for i in range(b):
        v = vs[i]
        w = ws[i]
        x = x0
        y = y0
        th = th0
        out[i, 0, 0] = x
        out[i, 0, 1] = y
        out[i, 0, 2] = th
        for k in range(nsteps):
            t2 = th + 0.5 * h * w
            t3 = th + 0.5 * h * w
            t4 = th + h * w
            x = x + h / 6.0 * (v * math.cos(th) + 2.0 * v * math.cos(t2) + 2.0 * v * math.cos(t3) + v * math.cos(t4))
            y = y + h / 6.0 * (v * math.sin(th) + 2.0 * v * math.sin(t2) + 2.0 * v * math.sin(t3) + v * math.sin(t4))
            th = th + h / 6.0 * (w + 2.0 * w + 2.0 * w + w)
            out[i, k + 1, 0] = x
            out[i, k + 1, 1] = y
            out[i, k + 1, 2] = th
    return out


def _loop_unicycle_eval(seg_states, seg_ctrl, seg_idx, taus, h):
    k = taus.shape[0]
    out = np.empty((k, 3))
    for q in range(k):
        s = seg_idx[q]
        v = seg_ctrl[s, 0]
        w = seg_ctrl[s, 1]
        x = seg_states[s, 0]
        y = seg_states[s, 1]
        th = seg_states[s, 2]
        tau = taus[q]
        nfull = int(math.floor(tau / h + 1e-9))
        rem = tau - nfull * h
        if rem < 1e-12:
            rem = 0.0
        for j in range(nfull + 1):
            hh = h
            if j == nfull:
                hh = rem
                if hh == 0.0:
                    break
            t2 = th + 0.5 * hh * w
            t3 = th + 0.5 * hh * w
            t4 = th + hh * w
            x = x + hh / 6.0 * (v * math.cos(th) + 2.0 * v * math.cos(t2) + 2.0 * v * math.cos(t3) + v * math.cos(t4))
            y = y + hh / 6.0 * (v * math.sin(th) + 2.0 * v * math.sin(t2) + 2.0 * v * math.sin(t3) + v * math.sin(t4))
            th = th + hh / 6.0 * (w + 2.0 * w + 2.0 * w + w)
        out[q, 0] = x
        out[q, 1] = y
        out[q, 2] = th
    return out


def _np_rk4_step(x, y, th, v, w, h):
    t2 = th + 0.5 * h * w
    t3 = th + 0.5 * h * w
    t4 = th + h * w
    x = x + h / 6.0 * (v * np.cos(th) + 2.0 * v * np.cos(t2) + 2.0 * v * np.cos(t3) + v * np.cos(t4))
    y = y + h / 6.0 * (v * np.sin(th) + 2.0 * v * np.sin(t2) + 2.0 * v * np.sin(t3) + v * np.sin(t4))
    th = th + h / 6.0 * (w + 2.0 * w + 2.0 * w + w)
    return x, y, th


def _np_rk4_unicycle(x0, y0, th0, vs, ws, h, nsteps):
    vs = np.asarray(vs, dtype=float)
    ws = np.asarray(ws, dtype=float)
    out = np.empty((vs.shape[0], nsteps + 1, 3))
    x = np.full(vs.shape, float(x0))
    y = np.full(vs.shape, float(y0))
    th = np.full(vs.shape, float(th0))
    out[:, 0, 0], out[:, 0, 1], out[:, 0, 2] = x, y, th
    for k in range(nsteps):
        x, y, th = _np_rk4_step(x, y, th, vs, ws, h)
        out[:, k + 1, 0], out[:, k + 1, 1], out[:, k + 1, 2] = x, y, th
    return out


def _np_unicycle_eval(seg_states, seg_ctrl, seg_idx, taus, h):
    taus = np.asarray(taus, dtype=float)
    v = seg_ctrl[seg_idx, 0]
    w = seg_ctrl[seg_idx, 1]
    x = seg_states[seg_idx, 0].copy()
    y = seg_states[seg_idx, 1].copy()
    th = seg_states[seg_idx, 2].copy()
    nfull = np.floor(taus / h + 1e-9).astype(np.int64)
    rem = taus - nfull * h
    rem = np.where(rem < 1e-12, 0.0, rem)
    top = int(nfull.max()) if nfull.size else 0
    for j in range(top):
        m = nfull > j
        if not m.any():
            break
        nx, ny, nth = _np_rk4_step(x[m], y[m], th[m], v[m], w[m], h)
        x[m], y[m], th[m] = nx, ny, nth
    m = rem > 0.0
    if m.any():
        nx, ny, nth = _np_rk4_step(x[m], y[m], th[m], v[m], w[m], rem[m])
        x[m], y[m], th[m] = nx, ny, nth
    return np.stack([x, y, th], axis=1)


# ---------------------------------------------------------------------------
# inter-robot checks


def _loop_first_contacts(pos, radii):
    n = pos.shape[0]
    k = pos.shape[1]
    cap = 16
    out = np.empty((cap, 3), dtype=np.int64)
    m = 0
    for a in range(n):
        for b in range(a + 1, n):
            lim = (radii[a] + radii[b]) ** 2
            prev = False
            for t in range(k):
                dx = pos[a, t, 0] - pos[b, t, 0]
                dy = pos[a, t, 1] - pos[b, t, 1]
                viol = dx * dx + dy * dy < lim
                if viol and not prev:
                    if m == cap:
                        grown = np.empty((cap * 2, 3), dtype=np.int64)
                        grown[:cap] = out
                        out = grown
                        cap *= 2
                    out[m, 0] = a
                    out[m, 1] = b
                    out[m, 2] = t
                    m += 1
                prev = viol
    return out[:m]


def _np_first_contacts(pos, radii):
    n = pos.shape[0]
    events = []
    for a in range(n):
        for b in range(a + 1, n):
            d = pos[a] - pos[b]
            viol = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] < (radii[a] + radii[b]) ** 2
            starts = viol & ~np.concatenate(([False], viol[:-1]))
            for t in np.flatnonzero(starts):
                events.append((a, b, int(t)))
    if not events:
        return np.empty((0, 3), dtype=np.int64)
    return np.asarray(events, dtype=np.int64)


def _loop_moving_clear(px, py, ks, obs_pos, obs_r, r, margin):
    last = obs_pos.shape[1] - 1
    for q in range(px.shape[0]):
        k = ks[q]
        if k > last:
            k = last
        if k < 0:
            k = 0
        for j in range(obs_pos.shape[0]):
            dx = px[q] - obs_pos[j, k, 0]
            dy = py[q] - obs_pos[j, k, 1]
            lim = r + obs_r[j] + margin
            if dx * dx + dy * dy <= lim * lim:
                return False
    return True


def _np_moving_clear(px, py, ks, obs_pos, obs_r, r, margin):
    if obs_pos.shape[0] == 0 or len(px) == 0:
        return True
    ks = np.clip(np.asarray(ks), 0, obs_pos.shape[1] - 1)
    dx = np.asarray(px)[None, :] - obs_pos[:, ks, 0]
    dy = np.asarray(py)[None, :] - obs_pos[:, ks, 1]
    lim = r + obs_r[:, None] + margin
    return bool(not (dx * dx + dy * dy <= lim * lim).any())


def _loop_linear_pairs_clear(p0, p1, radii, margin):
    n = p0.shape[0]
    for a in range(n):
        for b in range(a + 1, n):
            d0x = p0[a, 0] - p0[b, 0]
            d0y = p0[a, 1] - p0[b, 1]
            ex = (p1[a, 0] - p1[b, 0]) - d0x
            ey = (p1[a, 1] - p1[b, 1]) - d0y
            ee = ex * ex + ey * ey
            s = 0.0
            if ee > 0.0:
                s = -(d0x * ex + d0y * ey) / ee
                if s < 0.0:
                    s = 0.0
                elif s > 1.0:
                    s = 1.0
            mx = d0x + s * ex
            my = d0y + s * ey
            lim = radii[a] + radii[b] + margin
            if mx * mx + my * my <= lim * lim:
                return False
    return True


def _np_linear_pairs_clear(p0, p1, radii, margin):
    n = p0.shape[0]
    if n < 2:
        return True
    a, b = np.triu_indices(n, 1)
    d0 = p0[a] - p0[b]
    e = (p1[a] - p1[b]) - d0
    ee = e[:, 0] * e[:, 0] + e[:, 1] * e[:, 1]
    safe = np.where(ee > 0.0, ee, 1.0)
    s = np.where(ee > 0.0, -(d0[:, 0] * e[:, 0] + d0[:, 1] * e[:, 1]) / safe, 0.0)
    s = np.clip(s, 0.0, 1.0)
    mx = d0[:, 0] + s * e[:, 0]
    my = d0[:, 1] + s * e[:, 1]
    lim = radii[a] + radii[b] + margin
    return bool(not (mx * mx + my * my <= lim * lim).any())


# swept discs along polylines (exact capsule vs rectangle)


def _loop_seg_rect_d2(ax, ay, bx, by, x0, y0, x1, y1):
    # zero when the segment meets the closed rectangle (Liang-Barsky clip)
    dx = bx - ax
    dy = by - ay
    t0 = 0.0
    t1 = 1.0
    inside = True
    for e in range(4):
        if e == 0:
            p, q = -dx, ax - x0
        elif e == 1:
            p, q = dx, x1 - ax
        elif e == 2:
            p, q = -dy, ay - y0
        else:
            p, q = dy, y1 - ay
        if p == 0.0:
            if q < 0.0:
                inside = False
                break
        else:
            t = q / p
            if p < 0.0:
                if t > t0:
                    t0 = t
            elif t < t1:
                t1 = t
            if t0 > t1:
                inside = False
                break
    if inside:
        return 0.0
    best = np.inf
    for px, py in ((ax, ay), (bx, by)):
        cx = min(max(px, x0), x1)
        cy = min(max(py, y0), y1)
        d2 = (px - cx) ** 2 + (py - cy) ** 2
        if d2 < best:
            best = d2
    ee = dx * dx + dy * dy
    for cx, cy in ((x0, y0), (x0, y1), (x1, y0), (x1, y1)):
        s = 0.0
        if ee > 0.0:
            s = ((cx - ax) * dx + (cy - ay) * dy) / ee
            s = min(max(s, 0.0), 1.0)
        d2 = (ax + s * dx - cx) ** 2 + (ay + s * dy - cy) ** 2
        if d2 < best:
            best = d2
    return best


def _loop_chains_hits(pts, r, obs, bounds):
    nb = pts.shape[0]
    k = pts.shape[1]
    out = np.zeros(nb, dtype=np.bool_)
    r2 = r * r
    for b in range(nb):
        hit = False
        for j in range(k):
            x = pts[b, j, 0]
            y = pts[b, j, 1]
            if x - r <= bounds[0] or y - r <= bounds[1] or x + r >= bounds[2] or y + r >= bounds[3]:
                hit = True
                break
        if not hit:
            nseg = k - 1 if k > 1 else 1
            for j in range(nseg):
                ax = pts[b, j, 0]
                ay = pts[b, j, 1]
                jb = j + 1 if k > 1 else j
                bx = pts[b, jb, 0]
                by = pts[b, jb, 1]
                lox = min(ax, bx) - r
                hix = max(ax, bx) + r
                loy = min(ay, by) - r
                hiy = max(ay, by) + r
                for o in range(obs.shape[0]):
                    if obs[o, 0] > hix or obs[o, 2] < lox or obs[o, 1] > hiy or obs[o, 3] < loy:
                        continue
                    if _seg_rect_d2_nb(ax, ay, bx, by, obs[o, 0], obs[o, 1], obs[o, 2], obs[o, 3]) <= r2:
                        hit = True
                        break
                if hit:
                    break
        out[b] = hit
    return out


def _np_seg_rect_d2(ax, ay, bx, by, obs):
    """Squared distance between segments ``(C,)`` and rectangles ``(m, 4)``, shape ``(C, m)``."""
    ax, ay, bx, by = (np.asarray(v, dtype=float)[:, None] for v in (ax, ay, bx, by))
    x0, y0, x1, y1 = (obs[None, :, i] for i in range(4))
    dx = bx - ax
    dy = by - ay
    t0 = np.zeros(np.broadcast(ax, x0).shape)
    t1 = np.ones_like(t0)
    ok = np.ones(t0.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for p, q in ((-dx, ax - x0), (dx, x1 - ax), (-dy, ay - y0), (dy, y1 - ay)):
            p = np.broadcast_to(p, t0.shape)
            q = np.broadcast_to(q, t0.shape)
            zero = p == 0.0
            ok &= ~(zero & (q < 0.0))
            t = np.where(zero, 0.0, q / np.where(zero, 1.0, p))
            t0 = np.where(~zero & (p < 0.0), np.maximum(t0, t), t0)
            t1 = np.where(~zero & (p > 0.0), np.minimum(t1, t), t1)
            ok &= t0 <= t1
    best = np.full(t0.shape, np.inf)
    for px, py in ((ax, ay), (bx, by)):
        cx = np.minimum(np.maximum(px, x0), x1)
        cy = np.minimum(np.maximum(py, y0), y1)
        best = np.minimum(best, (px - cx) ** 2 + (py - cy) ** 2)
    ee = dx * dx + dy * dy
    safe = np.where(ee > 0.0, ee, 1.0)
    for cx, cy in ((x0, y0), (x0, y1), (x1, y0), (x1, y1)):
        s = np.where(ee > 0.0, ((cx - ax) * dx + (cy - ay) * dy) / safe, 0.0)
        s = np.clip(s, 0.0, 1.0)
        best = np.minimum(best, (ax + s * dx - cx) ** 2 + (ay + s * dy - cy) ** 2)
    return np.where(ok, 0.0, best)


def _np_chains_hits(pts, r, obs, bounds):
    pts = np.asarray(pts, dtype=float)
    x = pts[:, :, 0]
    y = pts[:, :, 1]
    out = (
        (x - r <= bounds[0]) | (y - r <= bounds[1]) | (x + r >= bounds[2]) | (y + r >= bounds[3])
    ).any(axis=1)
    if obs.shape[0] == 0:
        return out
    nb, k = x.shape
    if k > 1:
        a = pts[:, :-1, :].reshape(-1, 2)
        b = pts[:, 1:, :].reshape(-1, 2)
        nseg = k - 1
    else:
        a = b = pts[:, 0, :]
        nseg = 1
    d2 = _np_seg_rect_d2(a[:, 0], a[:, 1], b[:, 0], b[:, 1], obs)
    return out | (d2 <= r * r).any(axis=1).reshape(nb, nseg).any(axis=1)



# ---------------------------------------------------------------------------
# backend tables

_NAMES = (
    "disc_hits",
    "first_disc_hit",
    "segment_hits",
    "nearest",
    "nearest_se2",
    "rk4_unicycle",
    "unicycle_eval",
    "first_contacts",
    "moving_clear",
    "linear_pairs_clear",
    "chains_hits",
)

_seg_rect_d2_nb = njit(_loop_seg_rect_d2)

NUMPY = {name: globals()["_np_" + name] for name in _NAMES}
NUMBA = {name: njit(globals()["_loop_" + name]) for name in _NAMES}
BACKENDS = {"numba": NUMBA, "numpy": NUMPY}
ACTIVE = "numba" if USE_NUMBA else "numpy"

_impl = BACKENDS[ACTIVE]
disc_hits = _impl["disc_hits"]
first_disc_hit = _impl["first_disc_hit"]
segment_hits = _impl["segment_hits"]
nearest = _impl["nearest"]
nearest_se2 = _impl["nearest_se2"]
rk4_unicycle = _impl["rk4_unicycle"]
unicycle_eval = _impl["unicycle_eval"]
first_contacts = _impl["first_contacts"]
moving_clear = _impl["moving_clear"]
linear_pairs_clear = _impl["linear_pairs_clear"]
chains_hits = _impl["chains_hits"]
