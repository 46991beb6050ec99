import numpy as np
import pytest

from helpers import walkthrough_curves_list


@pytest.fixture
def walkthrough_curves():
    return walkthrough_curves_list()


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


# -- acceptance reporting -----------------------------------------------------

_ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = _ACCEPTANCE_MARKERS.get(report.nodeid)
    if marker is None:
        return
    number, title = marker
    outcome = "PASS" if report.passed else "FAIL"
    _ACCEPTANCE_RESULTS[number] = (outcome, title)


_ACCEPTANCE_MARKERS = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            _ACCEPTANCE_MARKERS[item.nodeid] = (mark.args[0], mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE_RESULTS):
        outcome, title = _ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"[{outcome}] criterion {number:>2}: {title}")
