import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def criterion_report():
    """Collects one pass/fail line per acceptance criterion for the
    end-of-run summary."""

    def record(num: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE_LINES.append(
            f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
