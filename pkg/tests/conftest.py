import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cipher.geometry import Configuration, Environment, RobotModel
from cipher.problem import Problem

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def empty16():
    return Environment((0.0, 0.0, 16.0, 16.0), (), "empty16")


@pytest.fixture
def disc():
    return RobotModel(0.5)


@pytest.fixture
def unicycle():
    return RobotModel(0.5, "unicycle")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def make_problem(env, robot, starts, goals, time_limit=30.0, seed=0):
    starts = [Configuration(*s) for s in starts]
    goals = [Configuration(*g) for g in goals]
    return Problem(env, (robot,) * len(starts), tuple(starts), tuple(goals), time_limit, seed)
