import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    deadline=None,  # numba JIT warmup can stall a first example
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
    max_examples=50,
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def geometric():
    from gwtrees import make_geometric

    return make_geometric(0.5)


@pytest.fixture(scope="session")
def stable15():
    from gwtrees import make_stable_family

    return make_stable_family(1.5)
