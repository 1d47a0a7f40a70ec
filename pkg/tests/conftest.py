import sys
from pathlib import Path

import pytest

from helpers import make_session
from fasthop.hopper_core import SessionConfig

DATA = Path(__file__).parent / "data"


@pytest.fixture
def session8() -> SessionConfig:
    return make_session(8)


@pytest.fixture
def data_dir() -> Path:
    return DATA


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
