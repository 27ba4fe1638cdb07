import pytest

# acceptance lines collected by the `criterion` fixture, printed at the end
_LINES = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


class _Criterion:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.notes = []

    def note(self, text):
        self.notes.append(text)


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    rec = _Criterion(number, title)
    yield rec
    rep = getattr(request.node, "rep_call", None)
    status = "PASS" if rep is not None and rep.passed else "FAIL"
    line = f"[{status}] {number:>2}. {title}"
    if rec.notes:
        line += " | " + "; ".join(rec.notes)
    _LINES.append((number, line))
    print("\n" + line)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)
