"""Numba vs numpy timings for the hot kernels, plus an optional end-to-end run.

    python3 benchmarks/bench_kernels.py [--repeat 200] [--e2e]

The end-to-end mode plans the same problem in two subprocesses, one with
CIPHER_DISABLE_NUMBA=1, and reports wall times.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from cipher import kernels
from cipher.bench.environments import gen_environment


def cases(rng):
    env = gen_environment("clutter-20", seed=0)
    obs, bounds = env.obstacle_array, env.bounds_array
    xs, ys = rng.uniform(0, 20, 2000), rng.uniform(0, 20, 2000)
    pts = np.ascontiguousarray(rng.uniform(0, 20, (8, 11, 2)))
    tree = np.ascontiguousarray(rng.uniform(0, 20, (5000, 2)))
    se2 = np.ascontiguousarray(np.column_stack([tree, rng.uniform(-np.pi, np.pi, 5000)]))
    vs, ws = rng.uniform(0, 1, 8), rng.uniform(-1, 1, 8)
    pos = np.ascontiguousarray(rng.uniform(0, 20, (8, 400, 2)))
    radii = np.full(8, 0.5)
    qx, qy = rng.uniform(0, 20, 20), rng.uniform(0, 20, 20)
    ks = np.arange(100, 120, dtype=np.int64)
    p0 = np.ascontiguousarray(rng.uniform(0, 20, (8, 2)))
    p1 = np.ascontiguousarray(p0 + rng.uniform(-1, 1, (8, 2)))
    return {
        "disc_hits": (xs, ys, 0.5, obs, bounds),
        "segment_hits": (1.0, 1.0, 19.0, 19.0, 0.5, 0.25, obs, bounds),
        "chains_hits": (pts, 0.5, obs, bounds),
        "nearest": (tree, 5000, np.array([10.0, 10.0])),
        "nearest_se2": (se2, 5000, np.array([10.0, 10.0, 0.5]), 0.25),
        "rk4_unicycle": (1.0, 1.0, 0.0, vs, ws, 0.05, 10),
        "first_contacts": (pos, radii),
        "moving_clear": (qx, qy, ks, pos, radii, 0.5, 1e-6),
        "linear_pairs_clear": (p0, p1, radii, 1e-6),
    }


def bench(fn, args, repeat: int) -> float:
    fn(*args)  # warm-up / compile
    t = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t) / repeat


def e2e(n: int) -> None:
    code = (
        "import time, json; from cipher.bench.environments import gen_environment, gen_scenario;"
        "from cipher.orchestrator import plan;"
        "e = gen_environment('clutter-20', seed=0); p = gen_scenario(e, %d, seed=1).problem(e, 120.0);"
        "plan(p, 'cipher');"  # first call pays compilation
        "t = time.perf_counter(); r = plan(p, 'cipher'); print(json.dumps([r.status, time.perf_counter() - t]))"
    ) % n
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, CIPHER_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        status, wall = json.loads(out.stdout.strip().splitlines()[-1])
        print(f"e2e cipher n={n} {label:6s} {status:8s} {wall * 1e3:9.1f} ms")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--e2e", action="store_true")
    ap.add_argument("-n", type=int, default=8)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':20s} {'numba us':>10s} {'numpy us':>10s} {'speedup':>8s}")
    for name, a in cases(rng).items():
        t_nb = bench(kernels.NUMBA[name], a, args.repeat)
        t_np = bench(kernels.NUMPY[name], a, args.repeat)
        print(f"{name:20s} {t_nb * 1e6:10.1f} {t_np * 1e6:10.1f} {t_np / t_nb:8.1f}")
    if args.e2e:
        e2e(args.n)


if __name__ == "__main__":
    main()
