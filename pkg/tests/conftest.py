import random

import pytest

from ncsdn.analytic import CASES


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def case1():
    return CASES["case1"]


# ---- acceptance criterion reporting -------------------------------------------
# tests/test_acceptance.py records one verdict per check; the summary prints a
# single PASS/FAIL line per criterion, whichever way pytest was invoked.

ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        entry = ACCEPTANCE.setdefault(number, {"title": title, "ok": True, "details": []})
        entry["ok"] = entry["ok"] and bool(ok)
        if detail:
            entry["details"].append(detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        e = ACCEPTANCE[number]
        verdict = "PASS" if e["ok"] else "FAIL"
        detail = "; ".join(e["details"])
        terminalreporter.write_line(f"[{verdict}] {number}. {e['title']}: {detail}")
