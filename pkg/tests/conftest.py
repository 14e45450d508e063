import numpy as np
import pytest

from phasetrack.calibration import Calibration, calibrate
from phasetrack.physics import ReceiverParams

# Acceptance results collected by tests/test_acceptance.py, echoed in the
# terminal summary so the PASS/FAIL lines survive output capturing.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def params():
    return ReceiverParams()


@pytest.fixture(scope="session")
def quick_calibration():
    """Tabulated r and f with unit gain at n_avg=5: enough for loop mechanics tests."""
    return Calibration.published(5.0, n_avg=5)


@pytest.fixture(scope="session")
def calib20():
    """Monte Carlo calibration at |alpha|^2=5, n_avg=20 (400 windows per offset)."""
    return calibrate(ReceiverParams(), 20, 400, np.random.default_rng(20))
