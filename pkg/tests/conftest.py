import sys

import numpy as np
import pytest

from bregvopt.kernels import BurgEntropy, LogBarrier, ShannonEntropy, SquaredNorm


def kernel_cases():
    """(kernel, low, high) with a sampling box inside the interior."""
    return [
        (SquaredNorm(2), -5.0, 5.0),
        (ShannonEntropy(2), 0.05, 10.0),
        (BurgEntropy(2), 0.05, 10.0),
        (LogBarrier([-1.0, 0.0], [1.0, 3.0]), np.array([-0.99, 0.01]), np.array([0.99, 2.99])),
    ]


KERNEL_IDS = ["squared_norm", "shannon", "burg", "log_barrier"]


@pytest.fixture(params=kernel_cases(), ids=KERNEL_IDS)
def kernel_case(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = next((m for n, m in list(sys.modules.items()) if n.endswith("test_acceptance")), None)
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
