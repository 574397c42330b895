import pytest

_VERDICTS: dict[int, str] = {}


class Criterion:
    """Collects the outcome of one acceptance criterion for the final summary."""

    def __init__(self, number: int):
        self.number = number
        self.details: list[str] = []

    def note(self, text: str) -> None:
        self.details.append(text)

    def line(self, ok: bool) -> str:
        return f"[criterion {self.number}] {'PASS' if ok else 'FAIL'}: " + "; ".join(self.details)


@pytest.fixture
def criterion(request):
    number = int(request.node.get_closest_marker("criterion").args[0])
    c = Criterion(number)
    yield c
    report = getattr(request.node, "rep_call", None)
    ok = report is not None and report.passed
    _VERDICTS[number] = c.line(ok)
    print("\n" + _VERDICTS[number])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[n])
