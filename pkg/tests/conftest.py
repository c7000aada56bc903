import numpy as np
import pytest

from impactlab import SimGrid, emini_params


@pytest.fixture(scope="session")
def params():
    return emini_params()


@pytest.fixture(scope="session")
def grid(params):
    """Default fine grid, dt = 0.1 min."""
    return SimGrid.from_horizon(params.horizon, 0.1)


@pytest.fixture(scope="session")
def coarse_grid(params):
    """Coarser grid for Monte Carlo heavy tests; rate statistics stay exact."""
    return SimGrid.from_horizon(params.horizon, 0.5)


@pytest.fixture(scope="session")
def rate_block_cache(params, coarse_grid):
    """One shared batch of rate paths for statistical tests (20k x 781)."""
    from impactlab.engine import simulate_rate_block

    return simulate_rate_block(params, coarse_grid, np.arange(20_000), master_seed=1001)
