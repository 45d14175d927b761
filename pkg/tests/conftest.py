import numpy as np
import pytest

from splitsamp import build_shifting_plan

_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""

    def add(criterion, ok, detail=""):
        _LINES.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip())
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance")
    for line in _LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def plan44():
    return build_shifting_plan(4, 4, [(0.0, 6.0)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
