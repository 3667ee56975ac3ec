import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """Log one acceptance verdict line; the terminal summary repeats them all."""
    def _record(criterion: int, passed: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
