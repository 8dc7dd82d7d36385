import numpy as np
import pytest
from hypothesis import given, strategies as st

from nmq.errors import ConfigError, InconsistentDetuning, NegativeRate
from nmq.model import (AtomSpec, CavitySpec, DriveSpec, EnvSpec, FeedbackSpec, as_dict,
                       validate)


def test_detuning_from_cavity_freq():
    a = validate(AtomSpec([0.0, 37.7], [0.2], [1.0], [1.0], cavity_freq=37.7))
    assert a.detunings == (0.0,)


def test_transition_freqs_three_level():
    a = validate(AtomSpec([0.0, 37.7, 75.3], [0.02, 0.02], [0.31, 0.31], [1.0, 1.0]))
    assert a.transition_freqs[1] == pytest.approx(37.6, abs=1e-12)


def test_negative_gamma():
    with pytest.raises(NegativeRate):
        validate(EnvSpec(-1.0, 50.0))


@pytest.mark.parametrize("spec", [
    CavitySpec(kappa=-0.1),
    CavitySpec(kappa_c=-1.0),
    FeedbackSpec(eta=0.0),
    FeedbackSpec(eta=1.5),
    AtomSpec([0.0, 1.0], [0.1], [-0.3], [1.0]),
])
def test_rates_out_of_range(spec):
    with pytest.raises(NegativeRate):
        validate(spec)


def test_inconsistent_detuning():
    with pytest.raises(InconsistentDetuning):
        validate(AtomSpec([0.0, 37.7], [0.2], [1.0], [1.0], detunings=[0.5], cavity_freq=37.7))


def test_drive_detuning_derived():
    d = validate(DriveSpec(0.01, drive_freq=37.0, cavity_freq=37.7))
    assert d.detuning == pytest.approx(0.7)
    with pytest.raises(InconsistentDetuning):
        validate(DriveSpec(0.01, detuning=0.1, drive_freq=37.0, cavity_freq=37.7))


def test_all_problems_collected():
    with pytest.raises(ConfigError) as info:
        validate(AtomSpec([0.0, 1.0, 2.0], [0.1, 0.1], [-1.0, -2.0], [1.0, 1.0]))
    assert len(info.value.problems) >= 2


def test_single_level_rejected():
    with pytest.raises(ConfigError):
        validate(AtomSpec([0.0], [], [], []))


@given(st.lists(st.floats(0.1, 80.0), min_size=1, max_size=4), st.floats(0.0, 80.0))
def test_validate_idempotent(energies, wc):
    E = [0.0] + sorted(energies)
    L = len(E) - 1
    a = AtomSpec(E, [0.01] * L, [0.3] * L, [1.0] * L, cavity_freq=wc)
    v1 = validate(a)
    v2 = validate(v1)
    assert as_dict(v1) == as_dict(v2)
    np.testing.assert_allclose(np.array(v1.detunings) + wc, v1.transition_freqs, atol=1e-12)
