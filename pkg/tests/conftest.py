import pytest

ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    def record(number, title, ok, detail=""):
        prev = ACCEPTANCE_LINES.get(number)
        ok = ok and (prev is None or prev[1])
        details = detail if prev is None else f"{prev[2]}; {detail}"
        ACCEPTANCE_LINES[number] = (title, ok, details)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        title, ok, detail = ACCEPTANCE_LINES[number]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}: {title} [{detail}]")
