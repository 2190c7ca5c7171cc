"""
Shared pytest configuration and fixtures for sbp-groundstate tests
"""

import numpy as np
import pytest
from dotenv import load_dotenv

from radial_space import RadialGrid, gaussian_profile
from solver import shooting_local

# Load environment variables for all tests
load_dotenv()


@pytest.fixture(scope="session")
def default_grid():
    """Session-scoped default grid (N=512, r_max=30)"""
    return RadialGrid.create()


@pytest.fixture(scope="session")
def coarse_grid():
    """Session-scoped coarse grid for solver and sweep tests"""
    return RadialGrid.create(n=192, r_max=20.0)


@pytest.fixture(scope="session")
def gaussian(default_grid):
    """The reference profile e^{-r²/2} on the default grid"""
    return gaussian_profile(default_grid)


@pytest.fixture(scope="session")
def shooting_solution(default_grid):
    """q = 0 ground state for ω = 1, p = 4.5 from the shooting oracle"""
    return shooting_local(1.0, 4.5, default_grid)


@pytest.fixture(scope="function")
def rng():
    """Function-scoped seeded generator"""
    return np.random.default_rng(0)


@pytest.fixture(scope="function")
def run_store_dir(tmp_path, monkeypatch):
    """Point the run store at a fresh temporary directory"""
    store = tmp_path / "runs"
    monkeypatch.setenv("SBP_RUN_STORE", str(store))
    return store
