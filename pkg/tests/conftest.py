import sys
from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"


def step_series() -> np.ndarray:
    """+-1 for positions 1..50, +-3 for 51..100 (1-based); shift at 0-based index 50."""
    i = np.arange(1, 101)
    return np.where(i <= 50, 1.0, 3.0) * (-1.0) ** i


def constant_series() -> np.ndarray:
    return (-1.0) ** np.arange(1, 101)


@pytest.fixture
def step():
    return step_series()


@pytest.fixture
def constant():
    return constant_series()


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
