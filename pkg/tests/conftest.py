import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# deterministic example generation so reruns print identical logs
settings.register_profile(
    "ebindex",
    derandomize=True,
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ebindex")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
