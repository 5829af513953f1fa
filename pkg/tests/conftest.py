import numpy as np
import pytest

from stochlattice.dynamics import Forcing, SystemParams
from stochlattice.noise import ou_attach, sample_wiener


@pytest.fixture(scope="session")
def long_path():
    return ou_attach(sample_wiener(11, -70.0, 30.0, 1e-3))


@pytest.fixture
def params():
    return SystemParams()


@pytest.fixture
def forcing():
    return Forcing()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def verdicts(request):
    """Collects one PASS/FAIL line per acceptance check for the terminal summary."""
    return request.config.stash.setdefault(_VERDICTS, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance verdicts")
        for line in sorted(lines):
            terminalreporter.write_line(line)
