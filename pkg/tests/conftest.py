from __future__ import annotations

from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
COURSE = FIXTURES / "course"

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture
def course_dir() -> Path:
    return COURSE


@pytest.fixture
def detail(request):
    """Attach a one-line summary to the acceptance criterion under test."""

    def note(text: str) -> None:
        request.node.user_properties.append(("detail", text))

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    number = marker.args[0]
    notes = "; ".join(v for k, v in item.user_properties if k == "detail")
    status = "PASS" if report.passed else "FAIL"
    if not report.passed and call.excinfo is not None:
        notes = (notes + "; " if notes else "") + call.excinfo.exconly().splitlines()[0][:200]
    _criteria[number] = (status, notes)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, notes = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {notes}")
