import math
import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from riccati_disc.periodic import TWO_PI, TrigPoly

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

PROBLEMS = os.path.join(os.path.dirname(os.path.dirname(__file__)), "problems")

EX1_GAMMA = "(45*cos(t)^2 - 29)/(3*cos(t) - 5)^2"
EX3_A2, EX3_A0 = "sin(t) - 2", "eta - cos(t)"
EX3_ETA_MIN = (3 - 2 * math.sqrt(3)) / 24


def problem(name: str) -> str:
    return os.path.join(PROBLEMS, name)


def trig_polys(max_order: int = 6, scale: float = 1.0, zero_mean: bool = True,
               min_order: int = 0):
    """Random trig polynomials of period 2*pi with coefficients in [-scale, scale]."""
    coef = st.floats(-scale, scale, allow_nan=False, allow_infinity=False)

    @st.composite
    def build(draw):
        n = draw(st.integers(min_order, max_order))
        a = draw(st.lists(coef, min_size=n, max_size=n))
        b = draw(st.lists(coef, min_size=n, max_size=n))
        c0 = 0.0 if zero_mean else draw(coef)
        return TrigPoly(TWO_PI, c0, np.array(a), np.array(b))

    return build()


@pytest.fixture
def rng():
    return np.random.default_rng(20241019)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
