import os

import numpy as np
import pytest
from hypothesis import settings

from nmq.model import AtomSpec, EnvSpec

settings.register_profile("nmq", deadline=None, max_examples=40, derandomize=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "nmq"))


@pytest.fixture
def fig3_atom():
    return AtomSpec([0.0, 37.7, 75.3], [0.02, 0.02], [0.31, 0.31], [1.0, 1.0],
                    detunings=[-0.02, -0.07])


@pytest.fixture
def fig3_env():
    return EnvSpec(10.0, 50.0)


@pytest.fixture
def two_level():
    """Two-level atom, detuned, with a SubCritical kernel (gamma=2, kappa=0.5, chi=1)."""
    return (AtomSpec([0.0, 49.1], [0.3], [0.5], [1.0], detunings=[0.9]), EnvSpec(2.0, 50.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
