import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "lab",
    max_examples=int(os.environ.get("HYPOTHESIS_MAX_EXAMPLES", 40)),
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("lab")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def disk_points(rng, count, radius):
    r = radius * np.sqrt(rng.uniform(size=count))
    return r * np.exp(2j * np.pi * rng.uniform(size=count))
