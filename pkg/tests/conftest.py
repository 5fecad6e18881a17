import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "seen": False, "notes": []})
    if report.when == "call" or report.outcome != "passed":
        entry["seen"] = True
        if hasattr(report, "wasxfail"):
            entry["ok"] = False
            entry["notes"].append(f"expected failure: {report.wasxfail}")
        elif not report.passed:
            entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        if not entry["seen"]:
            continue
        status = "PASS" if entry["ok"] else "FAIL"
        line = f"criterion {number:2d}: {status}  {entry['title']}"
        if entry["notes"]:
            line += "  (" + "; ".join(dict.fromkeys(entry["notes"])) + ")"
        terminalreporter.write_line(line)
