import math

import numpy as np
import pytest

from cipher.conflict import detect_conflicts
from cipher.decomposition import grid_decompose
from cipher.geometry import Environment, RobotModel
from cipher.guided import GuidanceParams
from cipher.mapf import solve_mapf
from cipher.problem import PlanResult, problem_from_lists
from cipher.resolution import (
    PlanState,
    ResolutionConfig,
    ResolutionContext,
    background_reservations,
    expansion_layer,
    max_attempts,
    resolve_conflict,
    seed_cells,
)
from cipher.bench.validate import validate
from cipher.trajectory import GeometricTrajectory

E = Environment((0.0, 0.0, 16.0, 16.0))
R = RobotModel(0.5)
# two crossing robots inside base cell (0, 0), one bystander in (1, 1)
STARTS = [(1.0, 4.5), (4.5, 1.0), (11.0, 11.0)]
GOALS = [(7.0, 4.5), (4.5, 7.0), (14.0, 14.0)]


def crossing_state(seed=0, n=3):
    p = problem_from_lists(E, R, STARTS[:n], GOALS[:n], seed=seed)
    d = grid_decompose(E, 2, 0.5, 1.05)
    g = d.region_graph(2)
    paths = solve_mapf(g, [d.project(s) for s in p.starts], [d.project(q) for q in p.goals], 2)
    trajs = [GeometricTrajectory.constant_speed(i, [s, q]) for i, (s, q) in enumerate(zip(STARTS[:n], GOALS[:n]))]
    state = PlanState(d, list(paths), trajs)
    ctx = ResolutionContext(p, GuidanceParams(), np.random.default_rng(seed), 2)
    (c,) = detect_conflicts(trajs, p.robots, decomposition=d)
    return p, state, ctx, c


def snapshot(state):
    return (state.d.signature(), [p.to_dict() for p in state.paths], [t.to_dict() for t in state.trajs])


def test_conflict_geometry():
    p, state, ctx, c = crossing_state()
    assert (c.robot_a, c.robot_b) == (0, 1)
    assert c.cell == ((0, 0),)
    assert expansion_layer(c, state.d) == 0
    assert seed_cells(c, state.d) == {((0, 0),)}
    # one layer covers the 2 x 2 grid, times three refinement depths
    assert max_attempts(c, state.d, ResolutionConfig()) == 2 * 3


@pytest.mark.parametrize("seed", range(4))
def test_resolves_crossing_and_leaves_bystander_alone(seed):
    p, state, ctx, c = crossing_state(seed)
    before = state.trajs[2].to_dict(), state.paths[2]
    assert resolve_conflict(c, state, ctx, ResolutionConfig())
    assert (state.trajs[2].to_dict(), state.paths[2]) == before
    assert detect_conflicts(state.trajs, p.robots) == []
    assert validate(PlanResult("success", "test", state.trajs), p).ok
    committed = [e for e in state.events if e.get("outcome") == "committed"]
    assert len(committed) == 1 and committed[0]["layer"] == 0
    assert state.d.min_leaf_side() >= 1.05 - 1e-12


def test_failure_leaves_state_untouched():
    p, state, ctx, c = crossing_state()
    before = snapshot(state)
    cfg = ResolutionConfig(replan_iterations=1)
    assert not resolve_conflict(c, state, ctx, cfg)
    assert snapshot(state) == before
    attempts = [e for e in state.events if e.get("event") == "attempt"]
    assert 0 < len(attempts) <= max_attempts(c, state.d, cfg)
    assert all(e["outcome"] != "committed" for e in attempts)
    # a second call fails the same way without side effects
    assert not resolve_conflict(c, state, ctx, cfg)
    assert snapshot(state) == before


def test_expired_deadline_gives_up_immediately():
    p, state, ctx, c = crossing_state()
    ctx.deadline = 0.0
    assert not resolve_conflict(c, state, ctx, ResolutionConfig())
    assert state.events == []


def test_background_reservations_example():
    d = grid_decompose(E, 2)
    # base side 8, unit speed: one step per 8 s; 12 s of motion spans two steps
    tr = GeometricTrajectory.constant_speed(0, [(1, 1), (13, 1)])
    res = background_reservations(d, [tr], 1.0)
    assert res.horizon == 2
    assert res.counts[(((0, 0),), 0)] == 1
    assert res.counts[(((1, 0),), 1)] == 1
    assert res.counts[(((1, 0),), 2)] == 1
    assert res.rest[((1, 0),)] == 1
    assert not background_reservations(d, [], 1.0).counts


def test_config_validation():
    with pytest.raises(ValueError):
        ResolutionConfig(max_refinement=0)
    with pytest.raises(ValueError):
        ResolutionConfig(mapf_budget=0)
    with pytest.raises(ValueError):
        ResolutionConfig(expansion_step=0)
    assert ResolutionConfig().to_dict()["max_refinement"] == 3
