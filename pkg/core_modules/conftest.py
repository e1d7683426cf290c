# conftest.py
# Shared fixtures for the core_modules tests

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from tree_core import from_degrees  # noqa: E402

# Node i of the seven-node example tree is index i - 1 here
FIG1_DEGREES = [3, 0, 1, 0, 2, 0, 0]


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help="run full-scale acceptance runs")


def pytest_configure(config):
    config.addinivalue_line('markers', "slow: full-scale run, skipped unless --runslow is given")


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def fig1_tree():
    return from_degrees(FIG1_DEGREES)


@pytest.fixture(autouse=True)
def _single_worker(monkeypatch):
    monkeypatch.setenv('GWHEAVY_THREADS', '1')
