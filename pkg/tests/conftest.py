"""共用測試資料."""

import numpy as np
import pytest

from src.config import DEFAULT_DETUNINGS_MHZ, RABI_OMEGA_C_MHZ
from src.state import density_from_tmf
from src.tmf import make_time_grid, rabi_tmf, tabulated_tmf
from src.utils import mhz_to_angular

GAMMA = 0.003
OMEGA_C = float(mhz_to_angular([RABI_OMEGA_C_MHZ])[0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def rabi_grid():
    """64 格 × 10 ns."""
    return make_time_grid(0.0, 10.0, 64)


@pytest.fixture
def default_detunings():
    return mhz_to_angular(DEFAULT_DETUNINGS_MHZ)


@pytest.fixture
def rabi(rabi_grid):
    return rabi_tmf(OMEGA_C, GAMMA, GAMMA, rabi_grid)


@pytest.fixture
def rabi_rho(rabi):
    return density_from_tmf(rabi)


@pytest.fixture
def small_grid():
    return make_time_grid(0.0, 10.0, 8)


@pytest.fixture
def random_tmf(rng):
    """產生隨機複數 TMF 的工廠."""

    def make(grid):
        samples = rng.standard_normal(grid.n_bins) + 1j * rng.standard_normal(grid.n_bins)
        return tabulated_tmf(grid, samples)

    return make
