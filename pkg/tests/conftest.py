from pathlib import Path

import pytest
from hypothesis import settings

from wlantcp.params import PhyMacParams, RateClassConfig

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"

_criteria: list[tuple[str, bool, str]] = []


@pytest.fixture
def params():
    return PhyMacParams()


@pytest.fixture
def mixed5():
    """Two STAs at 5.5 Mb/s and three at 11 Mb/s."""
    return RateClassConfig.from_counts([5.5e6, 11e6], [2, 3])


@pytest.fixture
def criterion():
    """Record one acceptance line; printed in the terminal summary."""

    def record(name: str, ok: bool, detail: str = ""):
        _criteria.append((name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _criteria:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
