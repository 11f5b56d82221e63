import numpy as np
import pytest
from hypothesis import settings

from fvwigner.kernel import PhysicalScales

settings.register_profile("fvwigner", max_examples=40, deadline=None)
settings.load_profile("fvwigner")

# filled by tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def unit_scales():
    return PhysicalScales()


@pytest.fixture
def field_scales():
    """hbar = m = c = 1 with b = 0.1, so a^2 = 10."""
    return PhysicalScales.from_b(0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
