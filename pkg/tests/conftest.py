import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=30)
settings.load_profile("repo")

ACCEPTANCE = {}


@pytest.fixture
def record_acceptance():
    """Store ``(passed, detail)`` for one acceptance criterion."""
    def record(number, title, passed, detail):
        ACCEPTANCE[number] = (title, bool(passed), detail)
        line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
        )
