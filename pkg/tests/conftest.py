import os

import pytest
from hypothesis import HealthCheck, settings

from reachcert import expr as ex
from reachcert import subdivide as sd

from oracles import CIRCLE, CURVE

settings.register_profile("repo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("stress", parent=settings.get_profile("repo"), max_examples=1000)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


@pytest.fixture(scope="session")
def circle():
    return ex.FunctionSystem.from_strings([CIRCLE], 2)


@pytest.fixture(scope="session")
def curve():
    return ex.FunctionSystem.from_strings([CURVE], 2)


@pytest.fixture(scope="session")
def circle_cert(circle):
    return sd.run(circle, 2.0, sd.SubdivisionConfig(M2=5.66, M3=2.0))


@pytest.fixture(scope="session")
def curve_cert(curve):
    return sd.run(curve, 3.0, sd.SubdivisionConfig(bound_mode="per-box"))


@pytest.fixture(scope="session")
def equator():
    return ex.FunctionSystem.from_strings(["x^2+y^2+z^2-1", "z"], 3)


@pytest.fixture(scope="session")
def equator_cert(equator):
    return sd.run(equator, 1.5, sd.SubdivisionConfig(bound_mode="per-box"))


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
