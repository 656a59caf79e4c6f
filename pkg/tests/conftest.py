import pytest

_CRITERIA: dict[int, tuple[bool, str, str]] = {}


class CriterionLog:
    """Collects one verdict per acceptance criterion for the terminal summary."""

    def record(self, number: int, title: str, passed: bool, detail: str):
        _CRITERIA[number] = (bool(passed), title, detail)
        print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}")


@pytest.fixture(scope="session")
def criteria():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        passed, title, detail = _CRITERIA[n]
        terminalreporter.write_line(f"{n:2d}. {'PASS' if passed else 'FAIL'}  {title}: {detail}")
