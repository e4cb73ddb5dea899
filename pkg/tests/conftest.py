import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from covariant_control.models import build_model  # noqa: E402


@pytest.fixture(scope="session")
def flat2():
    return build_model("flat", {"n": 2})


@pytest.fixture(scope="session")
def flat1():
    return build_model("flat", {"n": 1})


@pytest.fixture(scope="session")
def pendulum():
    return build_model("pendulum")


@pytest.fixture(scope="session")
def dpend():
    return build_model("double_pendulum")


@pytest.fixture(scope="session")
def sphere():
    return build_model("sphere")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store one acceptance line: record(criterion, passed, detail)."""
    def _record(criterion, passed, detail):
        ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
