import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from discwalker import Gains, RobotParams, design_gait
from discwalker.sim import ControlContext

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tools"))

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return RobotParams()


@pytest.fixture(scope="session")
def gait(params):
    return design_gait(params)


@pytest.fixture(scope="session")
def gains():
    return Gains()


@pytest.fixture(scope="session")
def ctx(params, gait, gains):
    return ControlContext(params, gait, gains)


@pytest.fixture(scope="session")
def oracle():
    import derive_dynamics

    return derive_dynamics.lambdified()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
