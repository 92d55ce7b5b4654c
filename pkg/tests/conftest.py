import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bicopter_lqg import BicopterParams, build_linear_model

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return BicopterParams()


@pytest.fixture(scope="session")
def model(params):
    return build_linear_model(params)


def random_stable(rng, n):
    """Random matrix shifted so its spectral abscissa is -1."""
    M = rng.standard_normal((n, n))
    return M - (np.linalg.eigvals(M).real.max() + 1.0) * np.eye(n)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
