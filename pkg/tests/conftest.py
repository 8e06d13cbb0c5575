"""Collect the per-criterion outcome lines of the acceptance suite and print them at the end."""
import pytest

_LINES = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = item.get_closest_marker("criterion")
    if crit is None or rep.when != "call":
        return
    detail = dict(item.user_properties).get("detail", "")
    status = "PASS" if rep.passed else "FAIL"
    if dict(item.user_properties).get("exploratory"):
        status = "EXPLORATORY" if rep.passed else "FAIL"
    _LINES.append((crit.args[0], f"criterion {crit.args[0]:>2}: {status}  {detail}".rstrip()))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)
