import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from smartplan import kernels

sys.path.insert(0, os.path.dirname(__file__))

import _report  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(params=kernels.available())
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    if _report.LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_report.LINES):
            terminalreporter.write_line(line)
