"""Shared fixtures and the acceptance-checklist terminal summary."""

import pytest

from gravortex.geometry import POINT_AT_INFINITY, build_grid
from gravortex.sections import Divisor, build_section


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(criterion, label): item of the acceptance checklist; "
        "the terminal summary prints one pass/fail line per criterion",
    )
    config._acceptance_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    criterion = marker.kwargs.get("criterion")
    label = marker.kwargs.get("label", item.name)
    results = item.config._acceptance_results
    entry = results.setdefault(criterion, {"label": label, "failed": False, "ran": False})
    if report.when == "call":
        entry["ran"] = True
    if report.failed:
        entry["failed"] = True


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance_results", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(results):
        entry = results[criterion]
        if not entry["ran"] and not entry["failed"]:
            status = "SKIP"
        else:
            status = "FAIL" if entry["failed"] else "PASS"
        terminalreporter.write_line(f"criterion {criterion}: {status} - {entry['label']}")


@pytest.fixture(scope="session")
def torus24():
    return build_grid("torus", 24)


@pytest.fixture(scope="session")
def torus32():
    return build_grid("torus", 32)


@pytest.fixture(scope="session")
def sphere16():
    return build_grid("sphere", 16)


@pytest.fixture(scope="session")
def sphere24():
    return build_grid("sphere", 24)


@pytest.fixture(scope="session")
def torus24_section(torus24):
    return build_section(torus24, Divisor(points=((0.25, 0.25),), multiplicities=(1,)))


@pytest.fixture(scope="session")
def antipodal_section16(sphere16):
    divisor = Divisor(points=((0.0, 0.0), POINT_AT_INFINITY), multiplicities=(1, 1))
    return build_section(sphere16, divisor)


@pytest.fixture(scope="session")
def antipodal_section24(sphere24):
    divisor = Divisor(points=((0.0, 0.0), POINT_AT_INFINITY), multiplicities=(1, 1))
    return build_section(sphere24, divisor)
