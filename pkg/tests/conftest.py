import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Record one acceptance line; printed in the terminal summary."""

    def _record(name, ok, detail=""):
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
