"""Pytest configuration and fixtures."""

import numpy as np
import pytest

from onehomog.homog import covering_map
from onehomog.quadrature import make_polar_grid
from onehomog.schema import ScenarioConfig
from onehomog.spectral import SkewCoefficients, build_lambda, quartic

from .factories import make_small_config


@pytest.fixture
def flagship_config():
    """Default scenario: m=2, lambda_12=1.5, quartic profile, k=2."""
    return ScenarioConfig()


@pytest.fixture
def small_config(tmp_path):
    """Flagship scenario on grids small enough for the pipeline tests."""
    return make_small_config(out_dir=tmp_path / "results")


@pytest.fixture
def flagship_lambda():
    """2x2 skew matrix with lambda_12 = 1.5."""
    return build_lambda(SkewCoefficients(2, {(1, 2): 1.5}))


@pytest.fixture
def profile():
    """f(t) = t^4 / 4."""
    return quartic()


@pytest.fixture
def grid():
    """Geometric polar grid on the unit disc, coarse enough for unit tests."""
    return make_polar_grid(1.0, 64, 128, "geometric", 0.9)


@pytest.fixture
def uniform_grid():
    """Uniform polar grid on the unit disc."""
    return make_polar_grid(1.0, 32, 64, "uniform")


@pytest.fixture
def u_bar():
    """The 2-covering map with a = 2^(-1/2)."""
    return covering_map(2)


@pytest.fixture
def rng():
    """Fixed-seed generator for test inputs."""
    return np.random.default_rng(1234)
