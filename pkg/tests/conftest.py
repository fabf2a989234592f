import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

# criterion number -> {"title": str, "outcomes": [bool], "notes": [str]}
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.fixture
def note(request):
    """Attach a measured value to the criterion line printed at the end of the run."""
    def add(text):
        request.node.user_properties.append(("note", text))
    return add


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = dict(report.user_properties).get("criterion")
    if marker is None:
        return
    number, title = marker
    entry = _CRITERIA.setdefault(number, {"title": title, "outcomes": [], "notes": []})
    entry["outcomes"].append(report.passed)
    entry["notes"] += [v for k, v in report.user_properties if k == "note"]


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["outcomes"] and all(entry["outcomes"]) else "FAIL"
        detail = f" ({'; '.join(entry['notes'])})" if entry["notes"] else ""
        tr.write_line(f"{status} criterion {number}: {entry['title']}{detail}")
