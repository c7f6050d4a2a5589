"""Acceptance summary: one PASS/FAIL line per criterion after the run."""

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when not in ("setup", "call"):
        return
    number, title = marker.args
    entry = _RESULTS.setdefault(number, {"title": title, "ok": True, "detail": []})
    if call.when == "call":
        entry["detail"].extend(v for k, v in item.user_properties if k == "detail")
    if call.excinfo is not None:
        entry["ok"] = False
        entry["detail"].append(call.excinfo.exconly().splitlines()[0][:160])


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        status = "PASS" if entry["ok"] else "FAIL"
        detail = "; ".join(entry["detail"])
        terminalreporter.write_line(f"[{status}] {number}. {entry['title']}" + (f" :: {detail}" if detail else ""))


@pytest.fixture
def detail(request):
    def add(text):
        request.node.user_properties.append(("detail", text))

    return add
