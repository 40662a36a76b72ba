import math

import pytest

from selbias import ModelParams
from selbias._backend import available_backends, using_backend

ACCEPTANCE_LINES = []


@pytest.fixture
def ref_params():
    """Ten arms, sigma=2, gamma^2=0.5, eta=1."""
    return ModelParams.from_squares(10, 0.5, 1.0, 2.0)


@pytest.fixture
def case1():
    return ModelParams(3, math.sqrt(0.5), 1.0, 1.0)


@pytest.fixture
def case2():
    return ModelParams(3, 1.0, math.sqrt(0.5), 1.0)


@pytest.fixture(params=available_backends())
def backend(request):
    with using_backend(request.param):
        yield request.param


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
