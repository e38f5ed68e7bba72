import os
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=500, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one summary line per acceptance criterion, pass or fail."""
    lines = request.config.stash[ACCEPTANCE]

    class Recorder:
        def __init__(self):
            self.started = time.perf_counter()
            self.detail = ""

        def elapsed(self):
            return time.perf_counter() - self.started

    rec = Recorder()
    yield rec
    failed = request.node.rep_call.failed if hasattr(request.node, "rep_call") else True
    mark = "FAIL" if failed else "PASS"
    lines.append(f"{mark}  {request.node.name.removeprefix('test_')}: {rec.detail} [{rec.elapsed():.1f} s]")


@pytest.hookimpl(wrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call":
        item.rep_call = rep
    return rep


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[ACCEPTANCE]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
