import pytest

_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)``; the summary prints one line per criterion."""

    def report(k: int, passed: bool, detail: str):
        _ACCEPTANCE[k] = (bool(passed), detail)
        print(f"criterion {k}: {'PASS' if passed else 'FAIL'} - {detail}")
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'} - {detail}")
