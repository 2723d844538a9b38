import random

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite", deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")


@pytest.fixture(scope="session")
def toy_rsa():
    """One deterministic 128-bit toy RSA key, fully populated."""
    from keyside.cli import toy_rsa_material
    return toy_rsa_material(128, random.Random(20260815))


@pytest.fixture(scope="session")
def toy_dsa():
    """One deterministic toy DSA key with 160-bit q and private x."""
    from keyside.cli import toy_dsa_material
    return toy_dsa_material(512, random.Random(20260815))


@pytest.fixture(scope="session")
def p256():
    from keyside import ecgroup
    return ecgroup.curve_by_name("P-256")
