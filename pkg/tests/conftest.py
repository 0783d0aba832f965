import pytest

VERDICTS = []


def pytest_addoption(parser):
    parser.addoption("--paper", action="store_true", default=False,
                     help="run the full 28-point, 30-experiment sweep (hours)")


@pytest.fixture
def verdict():
    """Record one acceptance line: verdict(number, passed, detail)."""

    def record(number, passed, detail):
        """``passed=None`` marks a criterion that was not run."""
        VERDICTS.append((number, passed, detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(VERDICTS, key=lambda v: v[0]):
        label = "NOT RUN" if passed is None else "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {label}  {detail}")
