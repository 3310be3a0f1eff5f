import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from granular_basin import validate  # noqa: E402

QUARTIC = (0.0, 0.0, -0.5, 0.0, 0.25)


@pytest.fixture(scope="session")
def quartic():
    return validate(QUARTIC)


@pytest.fixture(scope="session")
def report_ref(quartic):
    from granular_basin import analyze
    return analyze(quartic, 1.0, 0.5)


ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
