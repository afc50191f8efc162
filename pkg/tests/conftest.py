import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from aware.graph import AttributeSchema, graph_from_edges

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def path2():
    return graph_from_edges(2, [(0, 1)], [0, 1], 0, AttributeSchema((2,)))


@pytest.fixture
def triangle():
    return graph_from_edges(3, [(0, 1), (1, 2), (0, 2)], [0, 0, 0], 1, AttributeSchema((1,)))
