import os
from pathlib import Path

import pytest

DEFAULT_DATA_DIR = Path(__file__).resolve().parents[1] / "data" / "skytrax"


@pytest.fixture(scope="session")
def skytrax_dir():
    """Directory holding the public Skytrax scrape (airport.csv, lounge.csv, ...)."""
    path = Path(os.environ.get("TRAVELSAT_DATA", DEFAULT_DATA_DIR))
    files = [path / f"{c}.csv" for c in ("airport", "lounge", "airline", "seat")]
    if not all(f.is_file() for f in files):
        pytest.skip(f"public Skytrax snapshot not found in {path} (set TRAVELSAT_DATA)")
    return path


_outcomes: dict[int, list[str]] = {}
_titles: dict[int, str] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            item.user_properties.append(("criterion", mark.args[0]))
            _titles.setdefault(mark.args[0], mark.kwargs.get("title", ""))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(crit, []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_outcomes):
        results = _outcomes[crit]
        if "failed" in results:
            verdict = "FAIL"
        elif all(r == "skipped" for r in results):
            verdict = "SKIPPED"
        elif "skipped" in results:
            verdict = "PASS (partial: some checks skipped)"
        else:
            verdict = "PASS"
        terminalreporter.write_line(f"criterion {crit} {_titles.get(crit, '')}: {verdict}")
