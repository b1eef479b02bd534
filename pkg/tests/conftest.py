import json
import sys
from pathlib import Path

import pytest
from hypothesis import settings

from helpers import make_pop

ROOT = Path(__file__).resolve().parents[1]
DATA = Path(__file__).resolve().parent / "data"
FIXTURES = ROOT / "fixtures"

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def fixture_pop():
    return make_pop(30, 10, 20, 40, 2.0, 0.3, 2.0, 0.15)


@pytest.fixture(scope="session")
def procedure_oracle():
    return json.loads((DATA / "procedure_oracle.json").read_text(encoding="utf-8"))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
