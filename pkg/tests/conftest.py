import numpy as np
import pytest

from vesselsim.config import RunConfig
from vesselsim.phantom import TreeSpec, generate_tree_layout


@pytest.fixture(scope="session")
def tree_layout():
    return generate_tree_layout(TreeSpec(), seed=7)


@pytest.fixture(scope="session")
def tree_grid(tree_layout):
    return tree_layout.grid


@pytest.fixture()
def default_config():
    return RunConfig()


def random_grid(rng: np.random.Generator, width: int, height: int, p_occupied: float):
    """Random occupancy grid with closed boundary; used by oracle tests."""
    from vesselsim.phantom import OccupancyGrid

    occ = rng.random((height, width)) < p_occupied
    occ[0, :] = True
    occ[-1, :] = True
    occ[:, 0] = True
    occ[:, -1] = True
    return OccupancyGrid(occupied=occ, resolution=1.0)
