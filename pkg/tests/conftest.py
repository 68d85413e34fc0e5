import sys

import pytest

from hivnet.stochastic import RandomStream


@pytest.fixture
def stream():
    return RandomStream(12345, 0, 0)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
