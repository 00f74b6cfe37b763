import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

_CRITERIA = {}


def pytest_runtest_logreport(report):
    crit = getattr(report, "_criterion", None)
    if crit is None:
        return
    if report.when == "call" or report.outcome != "passed":
        number, title = crit
        entry = _CRITERIA.setdefault(number, {"title": title, "outcomes": []})
        entry["outcomes"].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result()._criterion = (marker.args[0], marker.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        outcomes = entry["outcomes"]
        if "failed" in outcomes:
            status = "FAIL"
        elif "passed" in outcomes:
            status = "PASS"
        else:
            status = "SKIP"
        terminalreporter.write_line(f"AC{number:<2} {status}  {entry['title']}")


@pytest.fixture(scope="session")
def fixture_csv():
    from importlib import resources

    return Path(resources.files("ewmask") / "data" / "synthetic_prices.csv")
