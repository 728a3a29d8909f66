import pytest

ACCEPTANCE_LINES = {}


@pytest.fixture
def report():
    """Record the one-line verdict of an acceptance criterion."""

    def record(number, passed, detail):
        verdict = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES[number] = f"criterion {number}: {verdict}  {detail}"
        print(ACCEPTANCE_LINES[number])

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=str):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
