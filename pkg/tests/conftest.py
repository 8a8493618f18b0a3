import pytest

_verdicts = []


@pytest.fixture
def verdict():
    """Record a one-line pass/fail summary for an acceptance criterion."""
    def record(criterion: str, ok: bool, detail: str) -> bool:
        _verdicts.append((criterion, "PASS" if ok else "FAIL", detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in sorted(_verdicts):
        terminalreporter.write_line(f"[{status}] criterion {criterion}: {detail}")
