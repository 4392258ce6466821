import time

import pytest

_ACCEPTANCE: dict[str, tuple[str, float, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    label = marker.args[0] if marker.args else item.name
    status = "PASS" if report.passed else "FAIL"
    detail = getattr(item, "acceptance_detail", "")
    _ACCEPTANCE[label] = (status, report.duration, detail)


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the acceptance summary."""
    def note(text):
        request.node.acceptance_detail = text
    return note


@pytest.fixture
def stopwatch():
    start = time.perf_counter()
    return lambda: time.perf_counter() - start


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0][1:])):
        status, secs, info = _ACCEPTANCE[label]
        terminalreporter.write_line(f"{status} {label} ({secs:.1f}s){' - ' + info if info else ''}")
