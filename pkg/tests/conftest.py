import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance criteria: number -> [outcome, detail]
_CRITERIA: dict[int, list] = {}


@pytest.fixture
def criterion(request):
    """Record a one-line detail for the acceptance criterion under test."""
    num = request.node.get_closest_marker("criterion").args[0]
    entry = _CRITERIA.setdefault(num, ["FAIL", ""])

    def note(text):
        entry[1] = text

    return note


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = dict(report.keywords).get("criterion")
    if marker is None:
        return
    num = int(report.nodeid.split("test_criterion_")[1].split("_")[0])
    entry = _CRITERIA.setdefault(num, ["FAIL", ""])
    entry[0] = "PASS" if report.passed else "FAIL"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, detail = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num}: {status}  {detail}")


def _normalize(v):
    v = np.asarray(v, dtype=float)
    return v / v.sum()


@st.composite
def dists(draw, n=None, min_n=2, max_n=8, zeros=True):
    """Probability vectors, optionally with exact zeros."""
    if n is None:
        n = draw(st.integers(min_n, max_n))
    lo = 0.0 if zeros else 1e-3
    raw = draw(st.lists(st.floats(lo, 1.0, allow_nan=False), min_size=n, max_size=n))
    if sum(raw) <= 1e-6:
        raw[0] = 1.0
    return _normalize(raw)


@st.composite
def dist_pairs(draw, min_n=2, max_n=8, zeros=True):
    n = draw(st.integers(min_n, max_n))
    return draw(dists(n=n, zeros=zeros)), draw(dists(n=n, zeros=zeros))
