import json
import shutil
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _criteria[n] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, status = _criteria[n]
        terminalreporter.write_line(f"[{status}] criterion {n}: {title}")


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def evolving(tmp_path):
    """A working copy of the evolving fixture repository plus its transitions."""
    src = FIXTURES / "evolving"
    repo = tmp_path / "repo"
    shutil.copytree(src / "base", repo)
    transitions = [json.loads(p.read_text()) for p in sorted((src / "transitions").glob("*.json"))]
    return repo, transitions, src / "reports.jsonl", src / "queries.jsonl"

