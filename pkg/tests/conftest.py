import pytest

_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}


@pytest.fixture
def record(request):
    """Store an acceptance verdict; call it before asserting so failures are listed too."""
    verdicts = request.config.stash[_VERDICTS]

    def _record(number: int, title: str, passed: bool, detail: str = ""):
        verdicts[number] = (title, bool(passed), detail)

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = config.stash.get(_VERDICTS, {})
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        title, passed, detail = verdicts[number]
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] criterion {number}: {title}" + (f" ({detail})" if detail else ""))
