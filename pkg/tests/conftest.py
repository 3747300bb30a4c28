import pytest

_LINES: dict = {}


@pytest.fixture
def report():
    """report(n, ok, text): record the PASS/FAIL line of acceptance criterion n."""
    def _report(n: int, ok: bool, text: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {text}"
        _LINES[n] = line
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
