import numpy as np
import pytest

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    _CRITERIA.append((number, title, report.outcome, report.duration, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome, duration, detail in sorted(_CRITERIA):
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"criterion {number:>2}: {status}  {title} ({duration:.1f}s)"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
