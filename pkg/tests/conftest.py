"""Acceptance summary: one PASS/FAIL line per criterion after the run."""

import pytest

_RESULTS = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _RESULTS.setdefault(number, {"title": title, "passed": True, "ran": False, "details": []})
    if call.when == "call" or call.excinfo is not None:
        entry["ran"] = True
        if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
            entry["passed"] = False
            entry["details"].append(f"{item.name}: {call.excinfo.typename}")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_teardown(item):
    yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        entry = _RESULTS.get(marker.args[0])
        if entry is not None:
            entry["details"].extend(f"{k} = {v}" for k, v in item.user_properties)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        e = _RESULTS[number]
        if not e["ran"]:
            continue
        status = "PASS" if e["passed"] else "FAIL"
        terminalreporter.write_line(f"{status}  criterion {number:>2}: {e['title']}")
        for d in e["details"]:
            terminalreporter.write_line(f"          {d}")
