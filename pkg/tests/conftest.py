"""Shared fixtures: a small radar model that keeps tests fast.

The small configuration (2x2 array, 49 samples, 196-entry snapshots) runs the
full pipeline in milliseconds per step while keeping every structural property
of the default configuration (band selection, virtual array, working window).
"""

import numpy as np
import pytest

from sigtrack import RadarConfig, SteeringModel, default_tracker_config


SMALL = dict(
    num_tx=2,
    num_rx=2,
    bandwidth=20e6,
    sample_rate=40e6,
    pulse_duration=0.8e-6,
    max_range=60.0,
)

# strong-return RCS for tracking tests on the small config: per-look component
# SNR at 30 m comes out near 26 dB, comfortably above the birth threshold
STRONG_RCS = 5.0


@pytest.fixture(scope="session")
def small_config():
    return RadarConfig(**SMALL)


@pytest.fixture(scope="session")
def small_model(small_config):
    return SteeringModel(small_config)


@pytest.fixture(scope="session")
def paper_config():
    return RadarConfig()


@pytest.fixture(scope="session")
def paper_model(paper_config):
    return SteeringModel(paper_config)


@pytest.fixture()
def small_tracker_config(small_config):
    return default_tracker_config(small_config, mean_rcs=STRONG_RCS)


def assert_allclose(actual, desired, rtol=1e-7, atol=0.0):
    np.testing.assert_allclose(actual, desired, rtol=rtol, atol=atol)
