import numpy as np
import pytest

import remsim as rs
from remsim.pumping import prepare_enhanced_profile


@pytest.fixture(scope="session")
def default_ensemble():
    return rs.ensemble_from_config(rs.default_material())


@pytest.fixture(scope="session")
def prepared_ensemble(default_ensemble):
    # enhanced-absorption preparation is the slowest fixture; share it
    return prepare_enhanced_profile(default_ensemble.copy())


@pytest.fixture(scope="session")
def pump1_ensemble(default_ensemble):
    return prepare_enhanced_profile(default_ensemble.copy(), pump1_only=True)


@pytest.fixture()
def small_ensemble():
    cfg = rs.default_material()
    cfg["grid"] = {"min_mhz": -175.0, "max_mhz": 175.0, "bin_mhz": 0.05}
    return rs.ensemble_from_config(cfg)


def rng(seed=0):
    return np.random.default_rng(seed)
