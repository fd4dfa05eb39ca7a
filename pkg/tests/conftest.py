import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def gs16_xi0():
    """DMRG ground state of the untilted N=16 chain, shared across suites."""
    from rootlab.groundstate import ground_state_mps
    from rootlab.model import ModelParams

    params = ModelParams(N=16, p=0.7, q=0.6)
    return params, ground_state_mps(params)
