import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from featlink.neuro import synth_pyramid  # noqa: E402

_CRITERIA = []


@pytest.fixture(scope="session")
def small_pyramid():
    return synth_pyramid(64, 64, seed=1)


@pytest.fixture
def criterion():
    """Record one acceptance verdict line; shown in the terminal summary."""

    def record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
