import os

import pytest
from hypothesis import settings

# first calls compile numba kernels, so no per-example deadline
settings.register_profile("radiomap", deadline=None, derandomize=True)
settings.load_profile("radiomap")

ACCEPTANCE = {}


@pytest.fixture
def record():
    """Record one acceptance line: ``record(n, passed, detail)``."""

    def _record(n, passed, detail=""):
        ACCEPTANCE[int(n)] = (bool(passed), detail)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_configure(config):
    os.environ.setdefault("PYTHONHASHSEED", "0")
