import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> (title, outcome, seconds, detail)
_ACCEPTANCE: dict[int, tuple[str, str, float, str]] = {}


@pytest.fixture
def record_detail(record_property):
    """Attach a one-line measurement summary to an acceptance test."""
    return lambda text: record_property("detail", text)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (rep.when != "call" and rep.passed):
        return
    num, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
    _ACCEPTANCE[num] = (title, "PASS" if rep.passed else "FAIL", rep.duration, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        title, status, secs, detail = _ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:>2} {status}  {title} ({secs:.1f} s)  {detail}")
