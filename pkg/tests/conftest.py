"""Shared hooks: one PASS/FAIL line per acceptance criterion in the terminal summary."""

from collections import defaultdict

import pytest

_outcomes: dict[int, dict] = defaultdict(lambda: {"title": "", "passed": True, "ran": False})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _outcomes[number]
    entry["title"] = title
    if rep.failed or rep.skipped:
        entry["passed"] = False
    if rep.when == "call":
        entry["ran"] = True


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        entry = _outcomes[number]
        status = "PASS" if entry["ran"] and entry["passed"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {entry['title']}")
