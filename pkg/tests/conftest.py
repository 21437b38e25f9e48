import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; printed together at the end of the session."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _LINES.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
