import time

import numpy as np
import pytest
from hypothesis import settings

from hoidiff.body import load_skeleton

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# criterion number -> {"title", "ok", "seconds", "notes"}
ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    n, title = mark.args
    entry = ACCEPTANCE.setdefault(n, {"title": title, "ok": True, "seconds": 0.0, "notes": []})
    entry["ok"] = entry["ok"] and report.passed
    entry["seconds"] += report.duration


@pytest.fixture
def note(request):
    """Attach a short measured value to the current test's criterion line."""
    mark = request.node.get_closest_marker("criterion")

    def add(text):
        if mark is not None:
            n, title = mark.args
            entry = ACCEPTANCE.setdefault(n, {"title": title, "ok": True, "seconds": 0.0, "notes": []})
            entry["notes"].append(text)
    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        e = ACCEPTANCE[n]
        status = "PASS" if e["ok"] else "FAIL"
        extra = "; ".join(e["notes"])
        line = f"criterion {n:2d} {status}  {e['title']} ({e['seconds']:.1f} s)"
        terminalreporter.write_line(line + (f"  [{extra}]" if extra else ""))


@pytest.fixture(scope="session")
def skel():
    return load_skeleton()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def stopwatch():
    start = time.perf_counter()
    return lambda: time.perf_counter() - start
