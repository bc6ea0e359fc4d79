import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from genheat.initial_data import from_yspace
from genheat.measure import capacity, lebesgue, lebesgue_plus_delta

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def cos_y(y):
    return np.cos(2 * np.pi * y)


def cos_sin_y(y):
    return np.cos(2 * np.pi * y) + np.sin(2 * np.pi * y)


@pytest.fixture(scope="session")
def one_atom():
    spec = lebesgue_plus_delta(0.5, 0.5)
    profile = capacity(spec, 512)
    data = from_yspace(cos_sin_y, 0.0, spec, 512, profile=profile)
    return spec, profile, data


@pytest.fixture(scope="session")
def uniform():
    spec = lebesgue()
    profile = capacity(spec, 512)
    data = from_yspace(cos_y, 0.0, spec, 512, profile=profile)
    return spec, profile, data


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
