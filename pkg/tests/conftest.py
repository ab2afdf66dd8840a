from __future__ import annotations

from pathlib import Path

import pytest

from probcer.io import read_events
from probcer.lang.validate import parse_rules

DATA = Path(__file__).parent / "data"
ASSIST_SRC = (DATA / "assist.rules").read_text()


@pytest.fixture
def table1():
    return read_events(DATA / "table1.jsonl")


@pytest.fixture
def assist_rules():
    return parse_rules(ASSIST_SRC)


@pytest.fixture
def dunk_events():
    return read_events(DATA / "dunk.jsonl")


# criterion number -> (ok, detail); filled by test_acceptance and printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
