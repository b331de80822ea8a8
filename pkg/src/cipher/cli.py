"""Command line interface.

Exit codes: 0 success / valid, 1 planning failure or validation violations,
2 usage error (argparse), 3 timeout, 4 bad input file or infeasible input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench.environments import GenerationError, Scenario, gen_environment, gen_scenario
from .bench.harness import BenchSpec, run_benchmark
from .bench.render import render_svg
from .bench.validate import validate
from .geometry import Environment, RobotModel
from .orchestrator import PLANNERS, PlannerConfig, decompose_for, plan
from .problem import InfeasibleInput, PlanResult

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_TIMEOUT, EXIT_INPUT = 0, 1, 2, 3, 4

log = logging.getLogger("cipher")


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_gen_env(args) -> int:
    params = {"size": args.size, "robot_radius": args.radius}
    if args.coverage is not None:
        params["coverage"] = args.coverage
    env = gen_environment(args.kind, params, args.seed)
    _write(args.out, json.dumps(env.to_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_gen_scenario(args) -> int:
    env = Environment.load(args.env)
    robot = RobotModel(args.radius, args.mode)
    sc = gen_scenario(env, args.n, robot, args.seed)
    _write(args.out, json.dumps(sc.to_dict(), indent=2) + "\n")
    return EXIT_OK


def _load_config(path: str | None) -> PlannerConfig:
    if path is None:
        return PlannerConfig()
    return PlannerConfig.from_dict(json.loads(Path(path).read_text()))


def cmd_plan(args) -> int:
    env = Environment.load(args.env)
    sc = Scenario.load(args.scenario)
    p = sc.problem(env, args.time_limit, args.seed)
    res = plan(p, args.planner, _load_config(args.config))
    if args.out:
        res.save(args.out)
    else:
        sys.stdout.write(res.dumps())
    log.info("%s: %s in %.3f s", args.planner, res.status, res.timing.get("wall_time", 0.0))
    return {"success": EXIT_OK, "timeout": EXIT_TIMEOUT}.get(res.status, EXIT_FAIL)


def cmd_validate(args) -> int:
    env = Environment.load(args.env)
    sc = Scenario.load(args.scenario)
    res = PlanResult.load(args.result)
    if res.status != "success":
        print(f"result status is {res.status}; nothing to validate", file=sys.stderr)
        return EXIT_FAIL
    rep = validate(res, sc.problem(env), args.dt)
    _write(args.out, json.dumps(rep.to_dict(), indent=2) + "\n")
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_bench(args) -> int:
    spec = BenchSpec.load(args.spec) if args.spec else BenchSpec()
    overrides = {}
    if args.time_limit is not None:
        overrides["time_limit"] = args.time_limit
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    if overrides:
        spec = BenchSpec.from_dict({**spec.to_dict(), **overrides})

    def progress(rec, timing):
        log.info("%-9s %-10s n=%-2d seed=%-2d %-8s %.2fs", rec["planner"], rec["env"], rec["n"], rec["seed"],
                 rec["status"], timing["wall_time"])

    out = run_benchmark(spec, args.out, progress)
    for row in out.aggregates:
        print(f"{row['planner']:9s} {row['env']:10s} n={row['n']:<3d} success {row['successes']}/{row['runs']}")
    return EXIT_OK if not any(r["invalid"] for r in out.aggregates) else EXIT_FAIL


def cmd_render(args) -> int:
    env = Environment.load(args.env)
    problem = Scenario.load(args.scenario).problem(env) if args.scenario else None
    result = PlanResult.load(args.result) if args.result else None
    decomposition = None
    if args.decomposition:
        if result is not None and result.decomposition is not None:
            decomposition = result.decomposition
        elif problem is not None:
            decomposition = decompose_for(problem, _load_config(args.config))
    svg = render_svg(env, result, decomposition, problem)
    if args.out:
        Path(args.out).write_bytes(svg)
    else:
        sys.stdout.write(svg.decode())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cipher", description="Multi-robot motion planning with resolution guidance.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen-env", help="generate an environment")
    sp.add_argument("kind", choices=["empty", "rooms", "clutter", "clutter-10", "clutter-20", "clutter-30"])
    sp.add_argument("--coverage", type=float, default=None, help="clutter obstacle fraction")
    sp.add_argument("--size", type=float, default=20.0)
    sp.add_argument("--radius", type=float, default=0.5, help="robot radius used for margins")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_gen_env)

    sp = sub.add_parser("gen-scenario", help="random starts and goals")
    sp.add_argument("env")
    sp.add_argument("-n", type=int, required=True)
    sp.add_argument("--mode", choices=["geometric", "unicycle"], default="geometric")
    sp.add_argument("--radius", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_gen_scenario)

    sp = sub.add_parser("plan", help="plan a scenario")
    sp.add_argument("env")
    sp.add_argument("scenario")
    sp.add_argument("--planner", choices=PLANNERS, default="cipher")
    sp.add_argument("--time-limit", type=float, default=60.0)
    sp.add_argument("--seed", type=int, default=None, help="planner seed (default: scenario seed)")
    sp.add_argument("--config", help="PlannerConfig JSON")
    sp.add_argument("-o", "--out", help="result file; timing goes to <out>.timing.json")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("validate", help="check a result independently")
    sp.add_argument("env")
    sp.add_argument("scenario")
    sp.add_argument("result")
    sp.add_argument("--dt", type=float, default=0.05)
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("bench", help="run a benchmark grid")
    sp.add_argument("spec", nargs="?", help="BenchSpec JSON (default: full grid)")
    sp.add_argument("--time-limit", type=float, default=None)
    sp.add_argument("--seeds", type=int, default=None)
    sp.add_argument("-o", "--out", default=None, help="output directory")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("render", help="draw an environment, plan or decomposition as SVG")
    sp.add_argument("env")
    sp.add_argument("--scenario")
    sp.add_argument("--result")
    sp.add_argument("--decomposition", action="store_true", help="draw the leaf grid")
    sp.add_argument("--config", help="PlannerConfig JSON for the decomposition")
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (InfeasibleInput, GenerationError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
