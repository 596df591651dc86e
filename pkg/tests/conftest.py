import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_results: list[tuple[int, str, str, float]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    n, title = mark.args
    outcome = "PASS" if call.excinfo is None else "FAIL"
    _results.append((n, title, outcome, call.duration))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, outcome, secs in sorted(_results):
        terminalreporter.write_line(f"criterion {n} {outcome}: {title} ({secs:.1f} s)")


@pytest.fixture(scope="session")
def elevator():
    from setint import stdlib
    return stdlib.load("elevator")
