import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from poisson_bound.models.map_model import poisson_process, validate_map  # noqa: E402
from poisson_bound.models.service_law import Exponential, ParetoTail, WeibullTail  # noqa: E402

MODEL_DIR = os.path.join(ROOT, "model_files")


@pytest.fixture
def model_path():
    return lambda name: os.path.join(MODEL_DIR, name)


@pytest.fixture
def mm1():
    """λ = 0.5, μ = 1: ρ = 1/2."""
    return poisson_process(0.5), Exponential(1.0)


@pytest.fixture
def map2():
    """Two phases, ϖ = (1/3, 2/3), λ = 1."""
    return validate_map(np.array([[-2.0, 1.0], [0.5, -1.5]]), np.eye(2))


@pytest.fixture
def weibull():
    return WeibullTail(beta=0.5, gamma=2.0)


@pytest.fixture
def pareto():
    return ParetoTail(kappa=3.0, scale=1.0)
