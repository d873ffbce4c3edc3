# [file name]: tests/conftest.py
import numpy as np
import pytest

from atomsense.physics_core import Species
from atomsense.rng import stream


@pytest.fixture
def rb87():
    return Species.rb87()


@pytest.fixture
def k_eff(rb87):
    return rb87.k_eff


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def seeded():
    """Factory for named deterministic streams in tests."""

    def make(name="detection", *index, seed=2024):
        return stream(seed, name, *index)

    return make
