import numpy as np
import pytest

from magcomp.simulator import SimConfig, simulate_flight, synthetic_anomaly_map


@pytest.fixture(scope="session")
def cal_flight():
    """Noise-free default calibration flight (box pattern, 6000 samples)."""
    cfg = SimConfig()
    frame, truth = simulate_flight(cfg)
    return cfg, frame, truth


@pytest.fixture(scope="session")
def anomaly_map():
    return synthetic_anomaly_map()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
