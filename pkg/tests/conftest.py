import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_check():
    def _record(check):
        line = check.line() + f" ({check.seconds:.1f}s)"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return check
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
