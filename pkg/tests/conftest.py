import pytest

from tfabred.primes import PrimeRegistry
from tfabred.system import FullSystem


@pytest.fixture(scope="session")
def built_system():
    """One default-built system shared by read-only tests."""
    system = FullSystem()
    system.ensure_stage(12)
    return system


@pytest.fixture()
def fresh_system():
    return FullSystem()


@pytest.fixture()
def registry():
    return PrimeRegistry()
