import pytest

_criteria = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: call with (label, ok, detail) before asserting."""

    def record(label, ok, detail=""):
        _criteria.append((label, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _criteria:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
