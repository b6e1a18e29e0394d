import pytest

_CRITERIA: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and not rep.failed and not rep.skipped):
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "status": "PASS", "seconds": 0.0})
    if rep.when == "call":
        entry["seconds"] += rep.duration
    if rep.failed:
        entry["status"] = "FAIL"
    elif rep.skipped and entry["status"] == "PASS":
        entry["status"] = "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        terminalreporter.write_line(
            f"criterion {number:>2}  {e['status']:<4}  {e['title']}  ({e['seconds']:.2f} s)"
        )
