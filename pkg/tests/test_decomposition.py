import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from shapely.geometry import box
from shapely.ops import unary_union

from cipher.decomposition import (
    OutOfBounds,
    RegionGraph,
    ResolutionTooFine,
    covers,
    expand_region,
    grid_decompose,
    leaf_area_total,
    max_expansion,
    refine,
)
from cipher.geometry import Environment

E16 = Environment((0.0, 0.0, 16.0, 16.0))
CLUTTER = Environment(
    (0.0, 0.0, 16.0, 16.0),
    ((0.0, 0.0, 4.0, 4.0), (5.0, 5.0, 7.5, 6.0), (9.0, 1.0, 10.0, 12.0), (12.5, 12.5, 15.0, 15.5)),
)


def test_grid_examples():
    d = grid_decompose(E16, 4)
    assert len(d) == 16
    assert all(math.isclose(c.area, 16.0) for c in d.leaves.values())
    assert d.occupied_cells() == []
    c = grid_decompose(CLUTTER, 4)
    cell = c.cell(((0, 0),))
    assert cell.occupied and cell.overlap == 1.0


def test_project_examples():
    d = grid_decompose(E16, 4)
    assert d.project((0.5, 0.5)) == ((0, 0),)
    assert d.project((4.0, 0.5)) == ((1, 0),)
    assert d.project((16.0, 16.0)) == ((3, 3),)
    r = refine(d, [((0, 0),)], 1)
    assert r.project((3.9, 3.9)) == ((0, 0), (1, 1))
    with pytest.raises(OutOfBounds):
        d.project((16.5, 1.0))


def test_refine_examples():
    d = grid_decompose(E16, 4, min_cell_side=1.0)
    r1 = refine(d, [((0, 0),)], 1)
    kids = [c for c in r1.leaves.values() if c.base == (0, 0)]
    assert len(kids) == 4 and all(math.isclose(c.area, 4.0) for c in kids)
    r3 = refine(d, [((0, 0),)], 3)
    assert r3.applied[((0, 0),)] == 2
    kids = [c for c in r3.leaves.values() if c.base == (0, 0)]
    assert len(kids) == 16 and all(math.isclose(c.area, 1.0) for c in kids)
    assert len(r3) == 31
    assert math.isclose(leaf_area_total(r3), 256.0)
    # the input is left untouched
    assert len(d) == 16


def test_too_fine_grid_rejected():
    with pytest.raises(ResolutionTooFine):
        grid_decompose(E16, 16, min_cell_side=1.05)


def test_expand_region_examples():
    d = grid_decompose(E16, 4)
    assert expand_region(d, {((1, 1),)}, 0) == {((1, 1),)}
    assert len(expand_region(d, {((1, 1),)}, 1)) == 9
    assert len(expand_region(d, {((0, 0),)}, 1)) == 4
    assert max_expansion(d, {((0, 0),)}) == 3
    assert covers(d, expand_region(d, {((0, 0),)}, 3))
    assert not covers(d, expand_region(d, {((0, 0),)}, 2))


def test_neighbor_examples():
    d = grid_decompose(E16, 4)
    assert len(d.neighbors(((0, 0),))) == 2
    assert len(d.neighbors(((1, 1),))) == 4
    r = refine(d, [((2, 1),)], 1)
    assert len(r.neighbors(((1, 1),))) == 5


def _mc_overlap(env, rect, rng, m=100_000):
    x = rng.uniform(rect[0], rect[2], m)
    y = rng.uniform(rect[1], rect[3], m)
    inside = np.zeros(m, dtype=bool)
    for o in env.obstacles:
        inside |= (x >= o[0]) & (x <= o[2]) & (y >= o[1]) & (y <= o[3])
    return inside.mean()


def test_overlap_fraction_matches_monte_carlo():
    rng = np.random.default_rng(7)
    d = grid_decompose(CLUTTER, 4)
    for c in d.leaves.values():
        assert abs(c.overlap - _mc_overlap(CLUTTER, c.rect, rng)) < 0.01


def test_overlap_fraction_matches_shapely_after_refinement():
    d = refine(grid_decompose(CLUTTER, 4, min_cell_side=0.5), [((1, 1),), ((2, 0),), ((3, 3),)], 2)
    obs = unary_union([box(*o) for o in CLUTTER.obstacles])
    for c in d.leaves.values():
        expected = obs.intersection(box(*c.rect)).area / c.area
        assert math.isclose(c.overlap, expected, abs_tol=1e-9)
        assert c.occupied == (c.overlap >= 0.5)


cells4 = st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=4)


def _refined(ops):
    d = grid_decompose(CLUTTER, 4, min_cell_side=1.0)
    for bases, k in ops:
        leaves = sorted(d.leaves)
        pick = [c for c in leaves if c[0] in set(bases)]
        if pick:
            d = refine(d, pick[:3], k)
    return d


refinements = st.lists(st.tuples(cells4, st.integers(1, 3)), max_size=3)


@given(refinements, st.floats(0, 16), st.floats(0, 16))
def test_tiling_projection_and_min_side(ops, x, y):
    d = _refined(ops)
    assert math.isclose(leaf_area_total(d), CLUTTER.area, rel_tol=1e-9)
    cid = d.project((x, y))
    r = d.rect(cid)
    b = CLUTTER.bounds
    assert (r[0] <= x < r[2] or (x == b[2] == r[2])) and (r[1] <= y < r[3] or (y == b[3] == r[3]))
    assert d.min_leaf_side() >= d.min_cell_side - 1e-12


@given(refinements)
def test_adjacency_symmetric(ops):
    d = _refined(ops)
    for a in d.leaves:
        for b in d.touching(a):
            assert a in d.touching(b)
        if not d.leaves[a].occupied:
            for b in d.neighbors(a):
                assert a in d.neighbors(b)


def _components(vertices, adj):
    comp = {}
    for v in vertices:
        if v in comp:
            continue
        comp[v] = v
        q = deque([v])
        while q:
            u = q.popleft()
            for w in adj(u):
                if w not in comp:
                    comp[w] = v
                    q.append(w)
    return comp


@given(refinements)
def test_refinement_preserves_connectivity_of_subdivided_free_space(ops):
    """Subdividing never disconnects free leaves; only newly occupied children can."""
    before = grid_decompose(CLUTTER, 4, min_cell_side=1.0)
    after = _refined(ops)

    def free_after(c):
        # a child counts as free if its base ancestor was free before refinement
        anc = c
        while anc not in before.leaves:
            anc = anc[:-1]
        return not before.leaves[anc].occupied

    verts = [c for c in after.leaves if free_after(c)]
    comp_after = _components(verts, lambda u: [w for w in after.touching(u) if free_after(w)])
    free_before = [c for c, cell in before.leaves.items() if not cell.occupied]
    comp_before = _components(free_before, before.neighbors)
    for a in free_before:
        for b in free_before:
            if comp_before[a] == comp_before[b]:
                assert comp_after[_first_leaf(after, a)] == comp_after[_first_leaf(after, b)]


def _first_leaf(d, cid):
    if cid in d.leaves:
        return cid
    return min(c for c in d.leaves if c[: len(cid)] == cid)


def test_region_graph_include_and_grid():
    d = grid_decompose(CLUTTER, 4)
    g = d.region_graph(1)
    assert ((0, 0),) not in g
    g2 = d.region_graph(1, include={((0, 0),)})
    assert ((0, 0),) in g2
    rg = RegionGraph.grid(3, 1)
    assert rg.distances_from(((0, 0),)) == {((0, 0),): 0, ((1, 0),): 1, ((2, 0),): 2}


def test_dump_round_trip_fields():
    d = refine(grid_decompose(CLUTTER, 4, min_cell_side=1.0), [((1, 1),)], 1)
    dump = d.to_dict()
    assert len(dump["leaves"]) == len(d)
    assert dump["min_cell_side"] == 1.0
    assert min(min(c["rect"][2] - c["rect"][0], c["rect"][3] - c["rect"][1]) for c in dump["leaves"]) >= 1.0
