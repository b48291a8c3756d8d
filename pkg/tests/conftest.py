import os
import warnings
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture
def numpy_backend(monkeypatch):
    """Force the pure-numpy kernels for the duration of a test."""
    monkeypatch.setenv("MANHATTAN_RW_DISABLE_NUMBA", "1")
    yield


@pytest.fixture(autouse=True)
def _quiet_degenerate_torus():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="L=2")
        yield


_ACCEPTANCE = []


@pytest.fixture
def record_acceptance():
    """Collect one summary line per acceptance criterion for the terminal report."""
    def record(number: int, passed: bool, detail: str):
        _ACCEPTANCE.append((number, passed, detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {detail}")
