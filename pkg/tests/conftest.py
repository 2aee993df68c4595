import pytest

from harness import ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture
def criterion(request):
    """Yields a dict for the test to fill with a detail string; records
    PASS or FAIL for the criterion once the test body finishes."""
    marker = request.node.get_closest_marker("criterion")
    number, name = marker.args
    info = {"detail": ""}
    yield info
    call = getattr(request.node, "rep_call", None)
    ok = call is not None and call.passed
    line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {name}: {info['detail']}"
    ACCEPTANCE[(number, name)] = line
    print(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep
