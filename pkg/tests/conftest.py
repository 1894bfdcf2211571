"""Shared hooks: collect per-criterion outcomes of the acceptance suite and print them."""

import pytest

_DETAILS: dict = {}
_OUTCOMES: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion covered by the test")


@pytest.fixture
def report(request):
    """``report(detail)`` attaches a one-line measurement to the test's criterion."""
    marker = request.node.get_closest_marker("criterion")

    def _report(detail: str) -> None:
        _DETAILS[marker.args[0]] = detail

    return _report


def pytest_runtest_logreport(report):
    marker = next((m for m in getattr(report, "_criterion", ()) if m), None)
    if marker is None:
        return
    num, title = marker
    failed = report.failed
    if report.when == "call" or failed:
        prev = _OUTCOMES.get(num, (title, "PASS"))[1]
        _OUTCOMES[num] = (title, "FAIL" if failed or prev == "FAIL" else "PASS")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    rep._criterion = (tuple(marker.args),) if marker else ()


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_OUTCOMES):
        title, status = _OUTCOMES[num]
        detail = _DETAILS.get(num, "")
        terminalreporter.write_line(f"{status} criterion {num:>2}: {title}" + (f" | {detail}" if detail else ""))
