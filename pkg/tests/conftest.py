import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from ecohen.graphio import ingest  # noqa: E402

from acceptance_log import LINES as ACCEPTANCE_LINES  # noqa: E402


@pytest.fixture(scope="session")
def toy():
    return ingest(HERE / "data" / "toy_nodes.csv", HERE / "data" / "toy_edges.csv")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
