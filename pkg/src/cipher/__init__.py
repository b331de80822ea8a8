"""Multi-robot motion planning guided by an adaptively refined workspace decomposition."""

from .conflict import Conflict, detect_conflicts
from .decomposition import Decomposition, RegionGraph, grid_decompose, refine
from .geometry import Configuration, Environment, RobotModel
from .guided import GuidanceParams
from .mapf import RegionPath, solve_mapf
from .orchestrator import PLANNERS, PlannerConfig, plan, plan_baseline, plan_cipher, plan_pprg
from .problem import InfeasibleInput, PlanResult, Problem
from .resolution import ResolutionConfig, resolve_conflict
from .trajectory import GeometricTrajectory, KinodynamicTrajectory, Trajectory, propagate_unicycle

__all__ = [
    "Conflict", "detect_conflicts", "Decomposition", "RegionGraph", "grid_decompose", "refine",
    "Configuration", "Environment", "RobotModel", "GuidanceParams", "RegionPath", "solve_mapf",
    "PLANNERS", "PlannerConfig", "plan", "plan_baseline", "plan_cipher", "plan_pprg",
    "InfeasibleInput", "PlanResult", "Problem", "ResolutionConfig", "resolve_conflict",
    "GeometricTrajectory", "KinodynamicTrajectory", "Trajectory", "propagate_unicycle",
]
