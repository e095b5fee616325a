"""Shared fixtures: the three bundled configurations and their solved problems."""

import math

import numpy as np
import pytest

import config
from services.experiments import build_problem
from services.lattice_geometry import build_lattice
from services.symbols import build_symbol, make_coefficient
from utils.config_loader import load_experiment_config

SQRT3_2 = math.sqrt(3.0) / 2.0


@pytest.fixture(scope="session")
def scalar_cfg():
    return load_experiment_config(config.CONFIGS_DIR / "scalar_d1.toml")


@pytest.fixture(scope="session")
def generic_cfg():
    return load_experiment_config(config.CONFIGS_DIR / "generic_d2.toml")


@pytest.fixture(scope="session")
def constant_cfg():
    return load_experiment_config(config.CONFIGS_DIR / "constant_d1.toml")


@pytest.fixture(scope="session")
def scalar_problem(scalar_cfg):
    return build_problem(scalar_cfg)


@pytest.fixture(scope="session")
def generic_problem(generic_cfg):
    return build_problem(generic_cfg)


@pytest.fixture(scope="session")
def constant_problem(constant_cfg):
    return build_problem(constant_cfg)


@pytest.fixture
def unit_line():
    return build_lattice([[1.0]])


@pytest.fixture
def square():
    return build_lattice(np.eye(2))


@pytest.fixture
def xi_squared():
    return build_symbol(2, [((2,), [[1.0]])], 1)


@pytest.fixture
def cosine_coefficient(unit_line):
    """g(x) = 1 + 0.5 cos(2 pi x)"""
    return make_coefficient(unit_line, [((0,), [[1.0]]), ((1,), [[0.25]])],
                            complete_hermitian=True, grid_resolution=64)
