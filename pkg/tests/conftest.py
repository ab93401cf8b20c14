import pytest

from chainshare.protocol import run_sharing_scenario


@pytest.fixture(scope="session")
def run42():
    """One canonical seeded store/share/accept run, shared across tests."""
    return run_sharing_scenario(42)
