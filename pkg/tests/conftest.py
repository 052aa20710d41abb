import math

import pytest

from inequality import chsh
from recipe_registry import SolverSettings
from recipe_runner import tsirelson_behavior


@pytest.fixture
def tsirelson():
    return tsirelson_behavior()


@pytest.fixture
def chsh_functional():
    return chsh()


@pytest.fixture
def settings():
    return SolverSettings()


@pytest.fixture
def chsh_tv_distance():
    return (math.sqrt(2.0) - 1.0) / 4.0
