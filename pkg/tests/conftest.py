import pytest

_LINES: list[str] = []


@pytest.fixture
def report_line():
    """Collect one summary line per acceptance criterion."""
    return _LINES.append


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
