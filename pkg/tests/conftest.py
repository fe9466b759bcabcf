import numpy as np
import pytest
from hypothesis import settings

from liouville import geometry

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

# criterion lines collected by tests/test_acceptance.py, printed at the end of the run
CRITERIA = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])


@pytest.fixture(scope="session")
def disk():
    return geometry.circle()


@pytest.fixture(scope="session")
def ellipse():
    return geometry.ellipse()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
