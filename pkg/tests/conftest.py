import pytest

_RESULTS = {}


class AcceptanceRecorder:
    """Collects one pass/fail line per acceptance criterion."""

    def record(self, number, title, passed, detail=""):
        _RESULTS[number] = (title, bool(passed), detail)
        status = "PASS" if passed else "FAIL"
        print(f"criterion {number} [{status}] {title}: {detail}")
        return passed


@pytest.fixture
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, passed, detail = _RESULTS[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number} [{status}] {title}: {detail}")
