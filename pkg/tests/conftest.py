import pytest

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture
def acceptance():
    """Record a PASS/FAIL line for an acceptance criterion."""

    def record(number: int, name: str, passed: bool, detail: str = ""):
        _ACCEPTANCE[number] = ("PASS" if passed else "FAIL", f"{name}{': ' + detail if detail else ''}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, text = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{status} criterion {number}: {text}")
