import dataclasses
import json
import math

import pytest

from cipher.bench.environments import blocking_instance, crossing_instance, gen_environment, gen_scenario
from cipher.bench.validate import validate
from cipher.geometry import Environment, RobotModel
from cipher.guided import GuidanceParams
from cipher.orchestrator import PLANNERS, PlannerConfig, base_resolution, decompose_for, plan
from cipher.problem import InfeasibleInput, PlanResult, problem_from_lists
from cipher.resolution import ResolutionConfig

E = Environment((0.0, 0.0, 20.0, 20.0))
R = RobotModel(0.5)


def test_single_robot_needs_no_resolution():
    p = problem_from_lists(E, R, [(2, 2)], [(18, 15)])
    res = plan(p, "cipher")
    assert res.success
    assert res.stats["conflicts_initial"] == 0 and res.stats["resolve_calls"] == 0
    assert validate(res, p).ok


@pytest.mark.parametrize("seed", range(3))
def test_crossing_in_open_space(seed):
    p, _ = crossing_instance()
    p = dataclasses.replace(p, seed=seed)
    res = plan(p, "cipher")
    assert res.success and validate(res, p).ok
    assert res.stats["resolved"] >= 0
    assert res.stats["min_leaf_side"] >= res.stats["min_cell_side"] - 1e-12


def test_infeasible_inputs():
    env = Environment((0.0, 0.0, 10.0, 10.0), ((4.0, 4.0, 6.0, 6.0),))
    with pytest.raises(InfeasibleInput):
        plan(problem_from_lists(env, R, [(1, 1)], [(5, 5)]), "cipher")
    with pytest.raises(InfeasibleInput):
        plan(problem_from_lists(env, R, [(1, 1), (1.5, 1)], [(8, 8), (8, 2)]), "pprg")
    with pytest.raises(InfeasibleInput):
        plan(problem_from_lists(env, RobotModel(0.5, "unicycle"), [(1, 1)], [(8, 8)]), "cipher")
    with pytest.raises(ValueError):
        plan(problem_from_lists(env, R, [(1, 1)], [(8, 8)]), "astar")


def test_base_resolution_examples():
    p = problem_from_lists(E, R, [(2, 2)], [(18, 15)])
    assert base_resolution(p, PlannerConfig()) == 4
    assert base_resolution(p, PlannerConfig(region_factor=1.0)) == 19
    assert base_resolution(p, PlannerConfig(region_factor=50.0)) == 1
    assert decompose_for(p, PlannerConfig()).base_side == pytest.approx(5.0)


def _scenario(n, seed, kind="clutter-20", robot=R):
    env = gen_environment(kind, {}, 3)
    return gen_scenario(env, n, robot, seed).problem(env, 30.0)


@pytest.mark.parametrize("planner", PLANNERS)
def test_same_seed_gives_identical_result_file(planner):
    p = _scenario(3, 1)
    a, b = plan(p, planner), plan(p, planner)
    assert a.dumps() == b.dumps()


def test_result_round_trip_and_sidecar(tmp_path):
    p = _scenario(2, 2)
    res = plan(p, "cipher")
    res.save(tmp_path / "r.json")
    back = PlanResult.load(tmp_path / "r.json")
    assert back.dumps() == res.dumps()
    timing = json.loads((tmp_path / "r.json.timing.json").read_text())
    assert "wall_time" in timing and "wall_time" not in (tmp_path / "r.json").read_text()
    with pytest.raises(ValueError):
        PlanResult.from_dict({"schema": "other"})


def test_budget_respected():
    p = dataclasses.replace(_scenario(8, 0, "clutter-30"), time_limit=0.5)
    res = plan(p, "coupled")
    assert res.status in ("timeout", "success", "failure")
    assert res.timing["wall_time"] <= 0.5 + 0.25
    res = plan(dataclasses.replace(p, time_limit=1e-3), "cipher")
    assert res.status == "timeout"


def test_fallback_runs_when_resolution_gives_up():
    p, _ = crossing_instance()
    cfg = PlannerConfig(resolution=ResolutionConfig(replan_iterations=1))
    res = plan(p, "cipher", cfg)
    assert res.stats["conflicts_initial"] >= 1
    assert res.stats["resolved"] == 0 and res.stats["conflicts_remaining"] >= 1
    assert res.stats["fallback"] in ("prioritized", "composite")
    assert any(e.get("event") == "resolve-failed" for e in res.events)
    assert any("stage" in e for e in res.events)
    assert res.success and validate(res, p).ok


def test_resolution_cap_hands_over_to_fallback():
    p, _ = crossing_instance()
    res = plan(p, "cipher", PlannerConfig(resolve_cap_factor=0))
    assert res.stats["resolve_calls"] == 0
    assert res.stats["fallback"] is not None and res.success


def test_baselines():
    p = problem_from_lists(E, R, [(2, 2)], [(18, 15)])
    for which in ("coupled", "decoupled", "pprg"):
        assert plan(p, which).success
    p2 = problem_from_lists(E, R, [(2, 10), (18, 10)], [(18, 10), (2, 10)])
    res = plan(p2, "coupled")
    assert res.success and validate(res, p2).ok


def test_decoupled_and_pprg_fail_on_blocking():
    p = blocking_instance()
    cfg = PlannerConfig(guidance=GuidanceParams(max_iterations=3000))
    for which in ("decoupled", "pprg"):
        res = plan(p, which, cfg)
        assert res.status == "failure" and res.stats["failed_robot"] == 1


def test_config_round_trip():
    cfg = PlannerConfig(region_factor=3.0, guidance=GuidanceParams(p_guided=0.5),
                        resolution=ResolutionConfig(max_refinement=2))
    assert PlannerConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_kinodynamic_cipher():
    robot = RobotModel(0.5, "unicycle")
    p = _scenario(3, 0, "empty", robot)
    res = plan(p, "cipher")
    assert res.success and validate(res, p).ok
    assert all(t.kind == "kinodynamic" for t in res.trajectories)
    assert not math.isnan(res.stats["min_leaf_side"])
