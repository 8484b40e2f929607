"""Shared fixtures and the acceptance-criteria summary printer.

The four-way candidate fixture is the worked running example used across
the entropy, update, and acceptance tests: eleven records, four nested
candidate partitions, probabilities (0.10, 0.26, 0.36, 0.28).
"""

from __future__ import annotations

import re
from pathlib import Path

import pytest

from erloop.core import Partition, ResultSet
from erloop.pipeline import load_records, load_truth

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def directory_dataset():
    return load_records(DATA_DIR / "directory.csv")


@pytest.fixture(scope="session")
def directory_truth(directory_dataset):
    return load_truth(DATA_DIR / "directory_truth.csv", directory_dataset)


def make_four_way() -> ResultSet:
    """Four nested candidate partitions over r1..r11 with a fixed prior."""
    p1 = Partition.from_clusters((("r1", "r7"), ("r3", "r4")))
    p2 = Partition.from_clusters((("r1", "r7", "r9"), ("r3", "r4")))
    p3 = Partition.from_clusters(
        (("r1", "r7", "r9"), ("r3", "r4", "r8"), ("r5", "r11"))
    )
    p4 = Partition.from_clusters(
        (("r1", "r2", "r7", "r9"), ("r3", "r4", "r6", "r8", "r10"), ("r5", "r11"))
    )
    return ResultSet((p1, p2, p3, p4), (0.10, 0.26, 0.36, 0.28))


@pytest.fixture()
def four_way() -> ResultSet:
    return make_four_way()


# ---------------------------------------------------------------------------
# acceptance summary: one pass/fail line per criterion

_CRITERION_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")
_criterion_results: dict[int, tuple[str, bool]] = {}
_criterion_notes: dict[int, str] = {}


@pytest.fixture()
def criterion_notes():
    """Measured figures a criterion wants echoed under its summary line."""
    return _criterion_notes


def pytest_runtest_logreport(report):
    match = _CRITERION_PATTERN.search(report.nodeid)
    if match is None:
        return
    number = int(match.group(1))
    label = match.group(2).replace("_", " ")
    if report.when == "call":
        _criterion_results[number] = (label, report.passed)
    elif report.failed:
        # setup/teardown failure counts against the criterion
        _criterion_results[number] = (label, False)


def pytest_terminal_summary(terminalreporter):
    if not _criterion_results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_criterion_results):
        label, passed = _criterion_results[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {label}")
        note = _criterion_notes.get(number)
        if note:
            terminalreporter.write_line(f"        {note}")
