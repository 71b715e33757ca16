import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SRC = os.path.join(ROOT, "src")
CONFIG_DIR = os.path.join(ROOT, "config")

# modules open their log file at import time
os.environ.setdefault("FRC_LOG_DIR", os.path.join(ROOT, "logs"))
sys.path.insert(0, SRC)

from model import MechModel, PolyNonlinearity, build_oscillator_chain, uniform_sine_forcing  # noqa: E402
from modal import compute_modes  # noqa: E402
from solvers import SolverConfig  # noqa: E402


def single_dof(omega0, zeta, cubic=0.0, label="sdof"):
    """m=1 oscillator with K = omega0^2, C = 2 zeta omega0 and S(x) = cubic * x^3."""
    terms = ((0, (0, 0, 0), cubic),) if cubic else ()
    return MechModel(1, [[1.0]], [[2.0 * zeta * omega0]], [[omega0 ** 2]],
                     PolyNonlinearity(1, (), terms), label=label)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def duffing():
    """Chain with one mass: K = 2, C = 2, S(x) = x^3."""
    model = build_oscillator_chain(1)
    return model, compute_modes(model)


@pytest.fixture(scope="session")
def chain2():
    model = build_oscillator_chain(2)
    return model, compute_modes(model)


@pytest.fixture(scope="session")
def chain20():
    model = build_oscillator_chain(20)
    return model, compute_modes(model)


@pytest.fixture
def tight_cfg():
    return SolverConfig(tol=1e-12)


@pytest.fixture
def sine():
    return uniform_sine_forcing
