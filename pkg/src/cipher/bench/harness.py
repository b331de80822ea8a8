"""Benchmark runner: every (planner, env, n, seed) cell, validated.

Records and aggregates exclude wall-clock numbers so that two runs of the
same spec give identical tables; timings go to a separate table.
"""

from __future__ import annotations

import json
import logging
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..geometry import RobotModel
from ..orchestrator import PLANNERS, PlannerConfig, plan
from .environments import gen_environment, gen_scenario
from .validate import validate

log = logging.getLogger(__name__)

BENCH_SCHEMA = "cipher.bench/1"


@dataclass(frozen=True)
class BenchSpec:
    envs: tuple[str, ...] = ("empty", "rooms", "clutter-10", "clutter-20", "clutter-30")
    counts: tuple[int, ...] = (2, 4, 8)
    seeds: int = 10
    time_limit: float = 600.0
    planners: tuple[str, ...] = PLANNERS
    mode: str = "geometric"  # geometric | unicycle
    robot_radius: float = 0.5
    env_seed: int = 0
    config: dict = field(default_factory=dict)  # PlannerConfig overrides

    def __post_init__(self):
        object.__setattr__(self, "envs", tuple(self.envs))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(self, "planners", tuple(self.planners))
        if not self.counts or any(c < 1 for c in self.counts):
            raise ValueError("robot counts must be positive")
        if any(b <= a for a, b in zip(self.counts, self.counts[1:])):
            raise ValueError("robot counts must be increasing")
        if self.seeds < 1 or self.time_limit <= 0:
            raise ValueError("seeds and time_limit must be positive")
        unknown = set(self.planners) - set(PLANNERS)
        if unknown:
            raise ValueError(f"unknown planners {sorted(unknown)}")
        if self.mode not in ("geometric", "unicycle"):
            raise ValueError("mode must be geometric or unicycle")

    def robot(self) -> RobotModel:
        return RobotModel(self.robot_radius, self.mode)

    def planner_config(self) -> PlannerConfig:
        return PlannerConfig.from_dict(self.config) if self.config else PlannerConfig()

    def to_dict(self) -> dict:
        return {"schema": BENCH_SCHEMA, **asdict(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "BenchSpec":
        data = {k: v for k, v in data.items() if k != "schema"}
        return cls(**data)

    @classmethod
    def load(cls, path) -> "BenchSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class BenchResult:
    records: list[dict]
    aggregates: list[dict]
    time_stats: list[dict]
    timings: list[dict]

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "records.jsonl", "w") as fh:
            for r in self.records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
        (out / "summary.json").write_text(json.dumps(self.aggregates, indent=1, sort_keys=True) + "\n")
        (out / "timing.json").write_text(
            json.dumps({"stats": self.time_stats, "runs": self.timings}, indent=1, sort_keys=True) + "\n"
        )


def _time_stats(xs: list[float]) -> dict:
    if not xs:
        return {"median": None, "mean": None, "stddev": None}
    return {
        "median": statistics.median(xs),
        "mean": statistics.fmean(xs),
        "stddev": statistics.stdev(xs) if len(xs) > 1 else 0.0,
    }


def aggregate(records: list[dict], timings: list[dict]) -> tuple[list[dict], list[dict]]:
    """Success rates per cell, and time statistics over successful runs."""
    groups: dict[tuple, list[int]] = {}
    for k, r in enumerate(records):
        groups.setdefault((r["planner"], r["env"], r["n"]), []).append(k)
    agg, tagg = [], []
    for (planner, env, n), idx in groups.items():
        ok = [k for k in idx if records[k]["status"] == "success" and records[k]["valid"]]
        agg.append({
            "planner": planner, "env": env, "n": n, "runs": len(idx),
            "successes": len(ok), "success_rate": len(ok) / len(idx),
            "timeouts": sum(records[k]["status"] == "timeout" for k in idx),
            "fallbacks": sum(records[k]["fallback"] is not None for k in idx),
            "invalid": sum(records[k]["status"] == "success" and not records[k]["valid"] for k in idx),
        })
        tagg.append({"planner": planner, "env": env, "n": n,
                     **_time_stats([timings[k]["wall_time"] for k in ok])})
    return agg, tagg


def run_benchmark(spec: BenchSpec, out_dir=None, progress=None) -> BenchResult:
    """Run every cell of ``spec``; ``progress(record, timing)`` is called after each run."""
    cfg = spec.planner_config()
    robot = spec.robot()
    records: list[dict] = []
    timings: list[dict] = []
    for env_kind in spec.envs:
        env = gen_environment(env_kind, {"robot_radius": spec.robot_radius}, spec.env_seed)
        for n in spec.counts:
            for seed in range(spec.seeds):
                scenario = gen_scenario(env, n, robot, seed)
                problem = scenario.problem(env, spec.time_limit, seed)
                for planner in spec.planners:
                    res = plan(problem, planner, cfg)
                    valid = None
                    violations = []
                    if res.status == "success":
                        report = validate(res, problem, 0.05)
                        valid = report.ok
                        violations = [v.to_dict() for v in report.violations]
                        if not valid:
                            log.error("invalid %s result on %s n=%d seed=%d", planner, env_kind, n, seed)
                    rec = {
                        "planner": planner, "env": env_kind, "n": n, "seed": seed,
                        "status": res.status, "valid": valid, "violations": violations,
                        "fallback": res.stats.get("fallback"),
                        "conflicts_initial": res.stats.get("conflicts_initial"),
                        "resolve_calls": res.stats.get("resolve_calls"),
                    }
                    records.append(rec)
                    timings.append({"planner": planner, "env": env_kind, "n": n, "seed": seed, **res.timing})
                    if progress is not None:
                        progress(rec, res.timing)
    agg, tagg = aggregate(records, timings)
    out = BenchResult(records, agg, tagg, timings)
    if out_dir is not None:
        out.write(out_dir)
    return out
