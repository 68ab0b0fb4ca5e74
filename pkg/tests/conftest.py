"""Shared pytest fixtures for gwrm-kit."""

from __future__ import annotations

import io

import numpy as np
import pytest

from gwrm_kit.chebyshev import Interval
from gwrm_kit.problems import linear_test, lorenz84, robertson


@pytest.fixture
def unit_interval():
    return Interval(-1.0, 1.0)


@pytest.fixture
def decay_problem():
    """``du/dt = -u`` on ``[0, 1]`` with ``u(0) = 1``."""
    return linear_test()


@pytest.fixture
def stiff_decay_problem():
    return linear_test(lam=-2400.0, span=(0.0, 0.2))


@pytest.fixture
def robertson_problem():
    return robertson()


@pytest.fixture
def lorenz_problem():
    return lorenz84()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def streams():
    """Capture stdout and stderr of a CLI call."""
    return io.StringIO(), io.StringIO()
