import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tabautodiff.fixtures import mixed_fixture  # noqa: E402
from tabautodiff.schema import read_csv  # noqa: E402


@pytest.fixture
def fixture_csv(tmp_path):
    path = tmp_path / "fixture.csv"
    mixed_fixture(500, seed=0).to_csv(path, index=False)
    return path


@pytest.fixture
def fixture_table(fixture_csv):
    return read_csv(fixture_csv)


def pytest_terminal_summary(terminalreporter):
    verdicts = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in nodeid and rep.when == "call":
                n = int(nodeid.split("test_criterion_")[1][:2])
                verdicts[n] = "PASS" if outcome == "passed" else "FAIL"
    if verdicts:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(verdicts):
            terminalreporter.write_line(f"criterion {n}: {verdicts[n]}")
