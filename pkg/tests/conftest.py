import numpy as np
import pytest

from cheshire.hilbert import SpinPathState


# independent hand expansions in the [up-I, down-I, up-II, down-II] basis
PSI_I = np.array([0.5, 0.5, 0.5, -0.5], dtype=complex)


def psi_f(chi=0.0):
    e = np.exp(-1j * chi)
    return np.array([0.5, -0.5, 0.5 * e, -0.5 * e], dtype=complex)


@pytest.fixture
def rng():
    return np.random.default_rng(20141)


@pytest.fixture
def cheshire_pair():
    return SpinPathState(PSI_I), SpinPathState(psi_f(0.0))


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split(".")[0])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
