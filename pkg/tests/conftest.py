"""Shared fixtures and the per-criterion acceptance summary."""

from __future__ import annotations

import numpy as np
import pytest

from furstat import BoundarySpec, StepDistribution, boundary_action, trivial_action
from furstat.experiments import random_bijective_action

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_collection_finish(session):
    for item in session.items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            entry = _CRITERIA.setdefault(number, {"title": title, "tests": 0, "passed": 0, "failed": []})
            entry["tests"] += 1


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    entry = _CRITERIA[mark.args[0]]
    if report.failed:
        entry["failed"].append(item.name)
    elif report.when == "call" and report.passed:
        entry["passed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        ok = not entry["failed"] and entry["passed"] == entry["tests"]
        status = "PASS" if ok else "FAIL"
        detail = f"{entry['passed']}/{entry['tests']} tests"
        if entry["failed"]:
            detail += "; failed: " + ", ".join(entry["failed"])
        terminalreporter.write_line(f"criterion {number:>2} {status}  {entry['title']} ({detail})")


@pytest.fixture(scope="session")
def m2():
    return StepDistribution.uniform(2)


@pytest.fixture(scope="session")
def boundary2(m2):
    return boundary_action(BoundarySpec(2, 2, m2))


@pytest.fixture(scope="session")
def boundary1(m2):
    return boundary_action(BoundarySpec(2, 1, m2))


@pytest.fixture(scope="session")
def trivial1(m2):
    return trivial_action([1.0], m2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def random_action(m2):
    def make(n_cells, rng):
        return random_bijective_action(n_cells, m2, rng)
    return make
