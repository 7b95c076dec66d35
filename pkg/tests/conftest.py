import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from irsrelay.channel import NetworkConfig, sample_channels
from irsrelay.metrics import phase_vector

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("IRSRELAY_FULLSCALE") == "1":
        return
    skip = pytest.mark.skip(reason="full-size run; set IRSRELAY_FULLSCALE=1")
    for item in items:
        if "fullscale" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def small_cfg():
    return NetworkConfig.from_dbm(30.0, n=4)


@pytest.fixture
def small_ch(small_cfg):
    return sample_channels(small_cfg, np.random.default_rng(11))


def random_phases(rng, n):
    return phase_vector(rng.uniform(0.0, 2.0 * np.pi, n))
