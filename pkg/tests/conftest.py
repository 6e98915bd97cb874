import os

import pytest
from hypothesis import HealthCheck, settings

from hycasim import kernels

settings.register_profile(
    "default", max_examples=200, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=50, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Each kernel backend that is importable in this build."""
    return kernels.get_backend(request.param)


ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)``."""
    def record(n, ok, detail="", soft=False):
        status = "PASS" if ok else ("SOFT" if soft else "FAIL")
        line = f"criterion {n}: {status}  {detail}".rstrip()
        ACCEPTANCE[(n, soft)] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
