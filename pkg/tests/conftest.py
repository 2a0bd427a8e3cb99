import os

# must happen before numpy/scipy load their BLAS
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import pytest

from glvortex import default_grid, solve_profile
from glvortex.profiles import ProfileSolveConfig

_GRIDS = {}
_PROFILES = {}


def get_grid(r_max=20.0, n_points=2000):
    key = (r_max, n_points)
    if key not in _GRIDS:
        _GRIDS[key] = default_grid(r_max=r_max, n_points=n_points)
    return _GRIDS[key]


def get_profile(n, lam, n_points=2000, refine=9, r_max=20.0):
    key = (n, lam, n_points, refine, r_max)
    if key not in _PROFILES:
        grid = get_grid(r_max, n_points)
        _PROFILES[key] = solve_profile(n, lam, grid,
                                       ProfileSolveConfig(refine=refine))
    return _PROFILES[key]


@pytest.fixture(scope="session")
def grid_default():
    return get_grid()


@pytest.fixture(scope="session")
def grid_coarse():
    return get_grid(n_points=600)


@pytest.fixture(scope="session")
def profiles():
    """Callable profile cache shared across the whole session."""
    return get_profile
