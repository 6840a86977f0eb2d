import time

import pytest

from saacmes.harness import Cell, run_cell

_REPORT: list[tuple[str, bool, str]] = []


class CellCache:
    """Runs benchmark cells once per session and remembers their cost."""

    def __init__(self):
        self._results = {}

    def get(self, cell: Cell, runs: int = 15, budget: int = 100_000):
        key = (cell, runs, budget)
        if key not in self._results:
            start = time.perf_counter()
            records = run_cell(cell, runs, budget, seed=0)
            self._results[key] = (records, time.perf_counter() - start)
        return self._results[key][0]

    def seconds(self, cell: Cell, runs: int = 15, budget: int = 100_000) -> float:
        return self._results[(cell, runs, budget)][1]


@pytest.fixture(scope="session")
def bench():
    return CellCache()


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line; call with (label, passed, detail)."""

    def record(label, passed, detail=""):
        _REPORT.append((label, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in _REPORT:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
