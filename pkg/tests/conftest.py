import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dyadic_a2.dyadic import build_dyadic_system
from dyadic_a2.space import grid_2d, power_grid, snowflake_grid, uniform_grid

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, passed: bool, detail: str):
    line = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def _system(space, delta=None, seed=0):
    delta = delta or 1.0 / (8 * space.c0**2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_dyadic_system(space, delta, seed=seed)


@pytest.fixture(scope="session")
def grid64():
    return uniform_grid(64)


@pytest.fixture(scope="session")
def grid128():
    space = uniform_grid(128)
    return space, _system(space)


@pytest.fixture(scope="session")
def small_spaces():
    out = []
    for space in (uniform_grid(96), grid_2d(10), snowflake_grid(80), power_grid(80)):
        out.append((space, _system(space)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
