"""Shared fixtures for the simulator test suite."""

import os
import sys

import pytest

# Repository root, so `config` and `src` import as they do for main.py
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.error_handler import get_error_handler, get_graceful_shutdown  # noqa: E402
from src.fields import GridSpec  # noqa: E402
from src.gp_core import GpHyperparams  # noqa: E402


@pytest.fixture(autouse=True)
def reset_error_state():
    """Error handler and shutdown flags are process-wide singletons."""
    get_error_handler().reset()
    yield
    get_error_handler().reset()
    get_graceful_shutdown().reset()


@pytest.fixture
def small_spec():
    return GridSpec(10.0)


@pytest.fixture
def small_hyperparams():
    return GpHyperparams(length_scale=2.0)
