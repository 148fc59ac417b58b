import zlib

import pytest

from pgsim.rand_core import RngStream

ACCEPTANCE_LINES = []


@pytest.fixture
def rng(request):
    # one stream per test, keyed by the test name so tests never share draws
    return RngStream(20240601, zlib.crc32(request.node.name.encode()))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
