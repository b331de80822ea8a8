import pytest
from hypothesis import given
from hypothesis import strategies as st

from cipher.decomposition import RegionGraph
from cipher.mapf import (
    MapfConstraint,
    MapfError,
    MapfInfeasible,
    RegionPath,
    Reservations,
    capacity_needed,
    find_first_mapf_conflict,
    low_level_search,
    solve_mapf,
)

from oracles import joint_state_optimum, random_grid_instance


def c(i, j=0):
    return ((i, j),)


def check_path(g: RegionGraph, p: RegionPath, start, goal):
    """RegionPath invariants, checked without the solver."""
    assert p.cells[0] == start and p.cells[-1] == goal
    for a, b in zip(p.cells, p.cells[1:]):
        assert a == b or b in g.adj[a]
    assert len(p.cells) == 1 or p.cells[-1] != p.cells[-2]


def test_single_robot_examples():
    g = RegionGraph.grid(4, 4)
    (p,) = solve_mapf(g, [c(0)], [c(3)])
    assert p.cost == 3 and len(p.cells) == 4
    (q,) = solve_mapf(g, [c(1, 1)], [c(1, 1)])
    assert q.cost == 0 and q.cells == (c(1, 1),)


def test_corridor_swap_infeasible():
    g = RegionGraph.grid(2, 1)
    with pytest.raises(MapfInfeasible):
        solve_mapf(g, [c(0), c(1)], [c(1), c(0)], 1)
    assert joint_state_optimum(g, [c(0), c(1)], [c(1), c(0)]) is None


def test_find_first_conflict_examples():
    a = RegionPath(0, (c(0),))
    b = RegionPath(1, (c(1),))
    assert find_first_mapf_conflict([a, b]) is None
    x = c(5)
    p = RegionPath(0, (c(0), c(1), c(2), x))
    q = RegionPath(1, (c(9), c(8), c(7), x))
    conf = find_first_mapf_conflict([p, q], 1)
    assert (conf.kind, conf.cell, conf.timestep, conf.robots) == ("vertex", x, 3, (0, 1))
    assert find_first_mapf_conflict([p, q], 2) is None
    s1 = RegionPath(0, (c(0), c(1)))
    s2 = RegionPath(1, (c(1), c(0)))
    conf = find_first_mapf_conflict([s1, s2], 5)
    assert conf.kind == "edge" and conf.timestep == 1


def test_low_level_examples():
    g = RegionGraph.grid(4, 1)
    p = low_level_search(g, c(0), c(3))
    assert p.cost == 3
    # the only corridor cell next to the start is forbidden at t = 1: wait once
    p = low_level_search(g, c(0), c(3), [MapfConstraint(0, c(1), 1)])
    assert p.cost == 4 and p.cells[:2] == (c(0), c(0))
    assert low_level_search(g, c(2), c(2)).cost == 0
    # a constraint for another robot is ignored
    assert low_level_search(g, c(0), c(3), [MapfConstraint(1, c(1), 1)], robot=0).cost == 3


def test_goal_constraint_after_arrival_forces_longer_path():
    g = RegionGraph.grid(3, 1)
    p = low_level_search(g, c(0), c(2), [MapfConstraint(0, c(2), 5)])
    assert p.cost == 6
    assert all(p.at(t) == c(2) for t in range(6, 10))


def test_reservations_block_cells():
    g = RegionGraph.grid(3, 2)
    res = Reservations()
    for t in range(0, 4):
        res.counts[(c(1, 0), t)] += 1
    res.rest[c(1, 0)] += 1
    res.horizon = 3
    (p,) = solve_mapf(g, [c(0, 0)], [c(2, 0)], 1, reservations=res)
    assert c(1, 0) not in p.cells
    assert p.cost == 4


def test_capacity_needed():
    assert capacity_needed([c(0), c(0), c(1)], [c(2), c(3), c(4)]) == 2
    assert capacity_needed([c(0)], [c(0)]) == 1


@pytest.mark.parametrize("seed", range(100))
def test_cbs_matches_joint_state_optimum(seed):
    g, starts, goals = random_grid_instance(seed)
    best = joint_state_optimum(g, starts, goals)
    if best is None:
        with pytest.raises(MapfError):
            solve_mapf(g, starts, goals, 1, max_nodes=5000)
        return
    paths = solve_mapf(g, starts, goals, 1)
    assert sum(p.cost for p in paths) == best
    for p, s, gl in zip(paths, starts, goals):
        check_path(g, p, s, gl)
    assert find_first_mapf_conflict(paths, 1) is None


@given(st.integers(0, 10_000), st.integers(1, 2))
def test_cbs_capacity_and_determinism(seed, cap):
    g, starts, goals = random_grid_instance(seed, max_side=4, max_robots=3)
    g = RegionGraph(g.vertices, g.adj, cap)
    try:
        a = solve_mapf(g, starts, goals, cap, max_nodes=3000)
    except MapfError:
        return
    b = solve_mapf(g, starts, goals, cap, max_nodes=3000)
    assert a == b
    assert find_first_mapf_conflict(a, cap) is None
    for p, s, gl in zip(a, starts, goals):
        check_path(g, p, s, gl)
    if cap == 1:
        best = joint_state_optimum(g, starts, goals, 1)
        assert best is not None and sum(p.cost for p in a) == best


def test_trace_and_round_trip():
    g = RegionGraph.grid(3, 3)
    trace = []
    paths = solve_mapf(g, [c(0, 1), c(1, 0)], [c(2, 1), c(1, 2)], trace=trace)
    assert trace and trace[-1]["conflict"] is None
    for p in paths:
        assert RegionPath.from_dict(p.to_dict()) == p


def test_constraint_validation():
    with pytest.raises(ValueError):
        MapfConstraint(0, c(0), -1)
    with pytest.raises(ValueError):
        MapfConstraint(0, c(0), 1, "edge")
