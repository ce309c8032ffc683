import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report(capsys):
    """Print one acceptance line immediately and again in the final summary."""

    def emit(number, passed, detail):
        line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line, flush=True)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
