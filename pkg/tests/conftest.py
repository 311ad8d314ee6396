import hypothesis
import numpy as np
import pytest

np.seterr(all="raise", under="ignore")

hypothesis.settings.register_profile(
    "fast", max_examples=20, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.load_profile("fast")


@pytest.fixture(scope="session")
def flat_metric():
    from entroflow import profiles

    return profiles.flat(profiles.uniform_grid(40.0, 2001))


@pytest.fixture(scope="session")
def ms_metric():
    from entroflow import profiles

    return profiles.ms_mass(profiles.uniform_grid(30.0, 1201), eps=0.1, b=2.0)
