import os
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
REAL_DATA_ENV = "PSFMARKET_BDS_DATA"

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "status": "PASS", "detail": ""})
    if report.failed:
        entry["status"] = "FAIL"
        entry["detail"] = report.longrepr.reprcrash.message if hasattr(report.longrepr, "reprcrash") else ""
    elif report.skipped and entry["status"] == "PASS":
        entry["status"] = "SKIP"
        entry["detail"] = report.longrepr[2] if isinstance(report.longrepr, tuple) else ""


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        line = f"criterion {number:>2} {e['status']:<4} {e['title']}"
        if e["detail"] and e["status"] != "PASS":
            line += f"  [{e['detail'].splitlines()[0][:160]}]"
        terminalreporter.write_line(line)


@pytest.fixture
def fixture_path():
    return FIXTURES / "bds_fixture.csv"


@pytest.fixture
def real_data_path():
    path = os.environ.get(REAL_DATA_ENV)
    if not path:
        pytest.skip(f"real BDS data not supplied (set {REAL_DATA_ENV})")
    return Path(path)
