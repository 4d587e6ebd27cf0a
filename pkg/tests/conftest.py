import warnings

import numpy as np
import pytest

from rotantenna.sca import NegativeProjectionWarning

ACCEPTANCE = {}


def record(criterion, passed, detail):
    """Store one acceptance line; printed in the terminal summary."""
    line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture(autouse=True)
def _quiet_projection_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NegativeProjectionWarning)
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
