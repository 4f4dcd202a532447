"""
Shared fixtures for the DIOT Lab test suite.
"""
import pytest

from config.protocol import ProtocolConfig
from utils.rng import DeterministicRNG


@pytest.fixture
def rng():
    return DeterministicRNG(1234)


@pytest.fixture
def small_cfg():
    """Small parameters that keep exact simulation fast."""
    return ProtocolConfig(n=16, l=2, domain_bits=3, seed=7)


@pytest.fixture
def ot4_cfg():
    return ProtocolConfig(n=64, l=2, domain_bits=3, seed=11)
