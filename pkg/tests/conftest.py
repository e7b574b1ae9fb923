"""
Shared fixtures and the ``slow`` marker for the acceptance tests.
"""
import math

import pytest

from chemotaxis_lab.initial_data import Atom, GaussianComponent, InitialMeasure
from chemotaxis_lab.kernels import bound_checks_enabled, set_bound_checks


def pytest_addoption(parser):
    parser.addoption(
        '--runslow', action='store_true', default=False, help='Run the slow acceptance tests'
    )


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running convergence or acceptance test')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def bound_checks():
    """Enable the kernel and drift bound assertions for one test."""
    previous = bound_checks_enabled()
    set_bound_checks(True)
    yield
    set_bound_checks(previous)


@pytest.fixture
def subcritical_blob():
    """Centered Gaussian of mass 4 pi and variance 0.5."""
    return InitialMeasure(gaussians=(GaussianComponent(0.0, 0.0, 0.5, 4.0 * math.pi),))


@pytest.fixture
def critical_pair():
    """Two atoms of mass 4 pi at distance 10."""
    return InitialMeasure(atoms=(Atom(-5.0, 0.0, 4.0 * math.pi), Atom(5.0, 0.0, 4.0 * math.pi)))
