import pytest

_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record the pass/fail line for an acceptance criterion."""
    def record(number: int, ok: bool, detail: str):
        _VERDICTS[number] = (ok, detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        ok, detail = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
