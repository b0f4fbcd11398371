import numpy as np
import pytest

from src.core import bilin, catalog
from src.core.bilin import BipartiteDims
from src.core.rankopt import OptimizerConfig


@pytest.fixture
def cfg():
    return OptimizerConfig(restarts=16, max_iters=300, seed=7)


@pytest.fixture
def light_cfg():
    return OptimizerConfig(restarts=6, max_iters=200, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def dims33():
    return BipartiteDims(3, 3)


@pytest.fixture(scope='session')
def tiles():
    return catalog.upb_tiles_state().state


@pytest.fixture(scope='session')
def chessboard():
    return catalog.chessboard_state().state


@pytest.fixture(scope='session')
def psi_plus_state():
    return bilin.DensityMatrix.from_pure(bilin.maximally_entangled(3))
