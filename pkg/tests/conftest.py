import pytest

_LINES: list[str] = []


@pytest.fixture
def record(request):
    """Attach a one-line summary to an acceptance test."""

    def _record(detail: str) -> None:
        request.node.user_properties.append(("detail", detail))

    return _record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when != "call" or "test_acceptance" not in item.nodeid:
        return
    crit = item.get_closest_marker("criterion")
    label = crit.args[0] if crit else item.name
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    status = "PASS" if rep.passed else "FAIL"
    _LINES.append(f"{status} criterion {label}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _LINES:
        terminalreporter.write_line(line)
