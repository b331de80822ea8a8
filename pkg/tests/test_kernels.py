"""Backend equivalence (numba vs numpy) and kernel oracles."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cipher import kernels
from cipher._jit import HAVE_NUMBA

NB, NP = kernels.NUMBA, kernels.NUMPY

OBS = np.array([[4.0, 4.0, 6.0, 6.0], [1.0, 7.0, 2.0, 9.0], [7.0, 1.0, 9.5, 2.0]])
BOUNDS = np.array([0.0, 0.0, 10.0, 10.0])

seeds = st.integers(0, 2**31 - 1)


def both(name, *args):
    return NB[name](*args), NP[name](*args)


@given(seeds, st.floats(0.05, 1.5))
def test_disc_hits_backends_agree(seed, r):
    rng = np.random.default_rng(seed)
    xs, ys = rng.uniform(-1, 11, 50), rng.uniform(-1, 11, 50)
    a, b = both("disc_hits", xs, ys, r, OBS, BOUNDS)
    assert np.array_equal(a, b)
    fa, fb = both("first_disc_hit", xs, ys, r, OBS, BOUNDS)
    assert fa == fb == (int(np.argmax(a)) if a.any() else -1)


def _dense_capsule_hits(pts, r, obs, bounds, m=400):
    """Oracle: dense sampling of every chord (slightly shrunk radius to avoid ties)."""
    out = []
    for chain in pts:
        hit = False
        for p, q in zip(chain[:-1], chain[1:]) if len(chain) > 1 else [(chain[0], chain[0])]:
            s = np.linspace(0, 1, m)[:, None]
            xy = p + s * (q - p)
            hit |= bool(NP["disc_hits"](xy[:, 0].copy(), xy[:, 1].copy(), r, obs, bounds).any())
        out.append(hit)
    return np.array(out)


@given(seeds, st.integers(1, 6), st.floats(0.1, 1.0))
def test_chains_hits_backends_and_dense_oracle(seed, k, r):
    rng = np.random.default_rng(seed)
    pts = np.ascontiguousarray(rng.uniform(0.5, 9.5, (6, k, 2)))
    a, b = both("chains_hits", pts, r, OBS, BOUNDS)
    assert np.array_equal(a, b)
    # the exact capsule test can only be stricter than sampling
    dense = _dense_capsule_hits(pts, r, OBS, BOUNDS)
    assert np.all(a[dense])
    # and never flags a chain whose every point is far from everything
    far = _dense_capsule_hits(pts, r * 1.05 + 0.05, OBS, BOUNDS)
    assert np.all(~a[~far])


def test_capsule_catches_chord_between_clear_endpoints():
    r = 0.5
    ends = np.array([[[3.0, 6.4]], [[7.0, 6.4]]])
    assert not NB["chains_hits"](np.ascontiguousarray(ends), r, OBS, BOUNDS).any()
    chord = np.array([[[3.0, 6.4], [7.0, 6.4]]])
    assert NB["chains_hits"](chord, r, OBS, BOUNDS)[0]
    assert NP["chains_hits"](chord, r, OBS, BOUNDS)[0]


@given(seeds)
def test_segment_hits_backends_agree(seed):
    rng = np.random.default_rng(seed)
    ax, ay, bx, by = rng.uniform(0, 10, 4)
    a, b = both("segment_hits", ax, ay, bx, by, 0.4, 0.2, OBS, BOUNDS)
    assert bool(a) == bool(b)


@given(seeds, st.integers(1, 200), st.integers(2, 4))
def test_nearest_backends_agree(seed, n, dim):
    rng = np.random.default_rng(seed)
    pts = np.ascontiguousarray(rng.uniform(0, 10, (n + 5, dim)))
    q = rng.uniform(0, 10, dim)
    a, b = both("nearest", pts, n, q)
    assert a == b
    assert a == int(np.argmin(((pts[:n] - q) ** 2).sum(axis=1)))


@given(seeds, st.integers(1, 100))
def test_nearest_se2_backends_agree(seed, n):
    rng = np.random.default_rng(seed)
    s = np.ascontiguousarray(np.column_stack([rng.uniform(0, 10, (n, 2)), rng.uniform(-4, 4, n)]))
    q = np.array([5.0, 5.0, rng.uniform(-math.pi, math.pi)])
    a, b = both("nearest_se2", s, n, q, 0.25)
    assert a == b


@given(seeds, st.integers(1, 12))
def test_rk4_backends_agree(seed, nsteps):
    rng = np.random.default_rng(seed)
    vs, ws = rng.uniform(0, 1, 5), rng.uniform(-1, 1, 5)
    a, b = both("rk4_unicycle", 1.0, 2.0, 0.3, vs, ws, 0.05, nsteps)
    assert a.shape == (5, nsteps + 1, 3)
    assert np.allclose(a, b, atol=1e-12)


def test_rk4_arc_closed_form():
    n = 1000
    out = NB["rk4_unicycle"](0.0, 0.0, 0.0, np.array([1.0]), np.array([1.0]), math.pi / n, n)
    assert np.allclose(out[0, -1], [0.0, 2.0, math.pi], atol=1e-9)


@given(seeds)
def test_unicycle_eval_backends_agree(seed):
    rng = np.random.default_rng(seed)
    seg_states = np.ascontiguousarray(rng.uniform(0, 5, (3, 3)))
    seg_ctrl = np.ascontiguousarray(np.column_stack([rng.uniform(0, 1, 3), rng.uniform(-1, 1, 3)]))
    idx = rng.integers(0, 3, 20).astype(np.int64)
    taus = rng.uniform(0, 0.5, 20)
    a, b = both("unicycle_eval", seg_states, seg_ctrl, idx, taus, 0.05)
    assert np.allclose(a, b, atol=1e-12)


@given(seeds)
def test_first_contacts_reports_every_violation_onset(seed):
    rng = np.random.default_rng(seed)
    pos = np.ascontiguousarray(rng.uniform(0, 6, (4, 30, 2)))
    radii = np.array([0.5, 0.4, 0.6, 0.5])
    a, b = both("first_contacts", pos, radii)
    assert np.array_equal(np.asarray(a), np.asarray(b))
    expected = []
    for i in range(4):
        for j in range(i + 1, 4):
            d = np.hypot(*(pos[i] - pos[j]).T)
            bad = d < radii[i] + radii[j]
            onsets = np.flatnonzero(bad & ~np.concatenate(([False], bad[:-1])))
            expected.extend((i, j, int(t)) for t in onsets)
    got = sorted(tuple(int(v) for v in row) for row in np.asarray(a))
    assert got == sorted(expected)


@given(seeds)
def test_moving_and_linear_pairs_backends_agree(seed):
    rng = np.random.default_rng(seed)
    obs_pos = np.ascontiguousarray(rng.uniform(0, 6, (3, 40, 2)))
    radii = np.array([0.5, 0.5, 0.5])
    px, py = rng.uniform(0, 6, 10), rng.uniform(0, 6, 10)
    ks = rng.integers(0, 60, 10).astype(np.int64)  # past the end: clamped
    a, b = both("moving_clear", px, py, ks, obs_pos, radii, 0.5, 1e-6)
    assert bool(a) == bool(b)
    p0 = np.ascontiguousarray(rng.uniform(0, 6, (3, 2)))
    p1 = np.ascontiguousarray(p0 + rng.uniform(-1, 1, (3, 2)))
    a, b = both("linear_pairs_clear", p0, p1, radii, 1e-6)
    assert bool(a) == bool(b)


@given(seeds)
def test_linear_pairs_clear_matches_sampling(seed):
    rng = np.random.default_rng(seed)
    p0 = rng.uniform(0, 3, (2, 2))
    p1 = p0 + rng.uniform(-2, 2, (2, 2))
    radii = np.array([0.5, 0.5])
    s = np.linspace(0, 1, 2001)[:, None]
    a = p0[0] + s * (p1[0] - p0[0])
    b = p0[1] + s * (p1[1] - p0[1])
    dmin = np.hypot(*(a - b).T).min()
    clear = NP["linear_pairs_clear"](p0, p1, radii, 1e-6)
    if dmin < 1.0 - 1e-3:
        assert not clear
    if dmin > 1.0 + 1e-3:
        assert clear


def test_backend_flag_selects_numpy(monkeypatch):
    import subprocess
    import sys

    code = "from cipher import kernels; print(kernels.ACTIVE)"
    env = {"CIPHER_DISABLE_NUMBA": "1", "PATH": "/usr/bin:/bin"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    if HAVE_NUMBA:
        env["CIPHER_DISABLE_NUMBA"] = "0"
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "numba"


@pytest.mark.parametrize("name", kernels._NAMES)
def test_every_kernel_has_both_backends(name):
    assert callable(NB[name]) and callable(NP[name])
