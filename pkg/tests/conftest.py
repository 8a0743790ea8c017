import pytest

_CRITERIA: dict[int, tuple[bool, str]] = {}


class CriterionRecorder:
    def __init__(self, number: int):
        self.number = number
        self.notes: list[str] = []
        self.ok = True

    def check(self, cond: bool, note: str) -> None:
        self.ok = self.ok and bool(cond)
        self.notes.append(("" if cond else "FAILED ") + note)


@pytest.fixture
def criterion(request):
    """Collects the checks of one acceptance criterion for the summary lines."""
    number = request.node.get_closest_marker("criterion").args[0]
    rec = CriterionRecorder(number)
    yield rec
    prev_ok, prev_notes = _CRITERIA.get(number, (True, ""))
    notes = "; ".join(n for n in (prev_notes, "; ".join(rec.notes)) if n)
    _CRITERIA[number] = (prev_ok and rec.ok and not getattr(request.node, "_failed", False), notes)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and report.failed:
        item._failed = True


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, notes = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({notes})")
