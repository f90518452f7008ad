import numpy as np
import pytest

from refocus.model import CavityModel, cavity_couplings
from refocus.search import default_problem, solve


@pytest.fixture(scope='session')
def cavity():
    return cavity_couplings(CavityModel(8, 0.05, 0.2))


@pytest.fixture(scope='session')
def s_free_pulse():
    """Symmetric pulse with s = 0 (alpha != 0)."""
    problem, seed = default_problem(('s',))
    return solve(problem, seed).shape


@pytest.fixture(scope='session')
def s_alpha_free_pulse():
    """Symmetric pulse with s = alpha = 0."""
    problem, seed = default_problem(('s', 'alpha'))
    return solve(problem, seed).shape


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section('acceptance criteria')
        for line in RESULTS:
            terminalreporter.write_line(line)
