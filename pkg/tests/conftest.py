import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from splatfield.field import Domain, default_quadrature

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def unit2():
    return Domain.unit(2)


@pytest.fixture
def unit3():
    return Domain.unit(3)


@pytest.fixture
def quad2(unit2):
    return default_quadrature(unit2)


@pytest.fixture
def rng():
    # test-only randomness; library code never uses this generator
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = None
    for name, module in list(__import__("sys").modules.items()):
        if name.endswith("test_acceptance") and hasattr(module, "RESULTS"):
            mod = module
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
