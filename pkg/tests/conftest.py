from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from secure_msr.field_tower import build_field_tower

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def gf8():
    return build_field_tower(3, 1)


@pytest.fixture(scope="session")
def t4():
    return build_field_tower(3, 4)


@pytest.fixture(scope="session")
def t16():
    return build_field_tower(3, 16)


@pytest.fixture(scope="session")
def t48():
    return build_field_tower(3, 48)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)

