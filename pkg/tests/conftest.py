"""Shared fixtures: a small synthetic world with its descriptor map.

Thread caps are set before numpy loads so timing-sensitive tests measure
single-threaded behavior regardless of the BLAS build.
"""

import os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from gridloc.grid import make_grid_spec
from gridloc.map_store import precompute
from gridloc.measurement import calibrate
from gridloc.simulator import PerturbationConfig, calibration_distances, generate_world

MINI_SEED = 5
MINI_SIDE = 900.0


@pytest.fixture(scope="session")
def mini_world():
    """A 900 m x 900 m world with the default appearance perturbation."""
    return generate_world(MINI_SEED, MINI_SIDE, MINI_SIDE)


@pytest.fixture(scope="session")
def mini_world_clean():
    """Same terrain as ``mini_world`` but with flight imagery == map imagery."""
    return generate_world(MINI_SEED, MINI_SIDE, MINI_SIDE, perturbation=PerturbationConfig(0.0, 0.0, 0.0, 0.0))


@pytest.fixture(scope="session")
def mini_spec():
    return make_grid_spec((0.0, MINI_SIDE, 0.0, MINI_SIDE), 10.0, 24)


@pytest.fixture(scope="session")
def mini_dmap(mini_world, mini_spec):
    return precompute(mini_world.map_raster, mini_spec, w=100.0, D=8, out_res=10.0)


@pytest.fixture(scope="session")
def mini_calib(mini_world, mini_dmap):
    match, nonmatch = calibration_distances(mini_world, mini_dmap, 400, 99, w=100.0, out_res=10.0)
    return calibrate(match, nonmatch)


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)
