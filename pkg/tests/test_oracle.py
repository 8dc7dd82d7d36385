import numpy as np
import pytest

from nmq.errors import DimensionTooLarge, GridMismatch
from nmq.ltv import Trajectory
from nmq.model import AtomSpec, CavitySpec, DriveSpec, EnvSpec, FeedbackSpec
from nmq.oracle import (HilbertConfig, add_feedback, basis_state, build_operators,
                        compare_meanfield, evolve, evolve_auto_cutoff, sigma_x,
                        single_cavity_model, sme_ensemble)


def _model(g=0.3, kap=0.5, **kw):
    atom = AtomSpec([0.0, 49.1], [g], [kap], [1.0], detunings=[0.9])
    return single_cavity_model(atom, EnvSpec(2.0, 50.0), **kw)


def test_generator_is_trace_free_and_hermitian():
    m = _model(n_ph=2, cavity=CavitySpec(kappa=0.4, kappa_c=0.3), drive=DriveSpec(0.1))
    rng = np.random.default_rng(0)
    X = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    rho = X @ X.conj().T
    rho /= np.trace(rho)
    F = np.array([0.3 - 0.2j, 0.1 + 0.4j])
    out = m.rhs(0.7, rho, F)
    assert abs(np.trace(out)) < 1e-14
    np.testing.assert_allclose(out, out.conj().T, atol=1e-14)


def test_markov_decay_rate():
    atom = AtomSpec([0.0, 50.0], [0.0], [0.8], [1.0])
    m = single_cavity_model(atom, EnvSpec(2.0, 50.0))
    rho0 = basis_state(m.ops.cfg, [1], [0])
    tr = evolve(m, rho0, 2.0, dt=0.001, stride=100, F0=[0.5], frozen=True)
    np.testing.assert_allclose(tr["pop_1"], np.exp(-0.8 * tr.t), atol=1e-10)


def test_vacuum_rabi():
    g = 0.7
    atom = AtomSpec([0.0, 50.0], [g], [0.0], [1.0])
    m = single_cavity_model(atom, EnvSpec(2.0, 50.0))
    tr = evolve(m, basis_state(m.ops.cfg, [0], [1]), 5.0, dt=0.001, stride=100)
    np.testing.assert_allclose(tr["pop_1"], np.sin(g * tr.t) ** 2, atol=1e-10)
    assert tr.meta["trace_drift"] < 1e-12 and tr.meta["herm_err"] < 1e-12


def test_dimension_guard():
    with pytest.raises(DimensionTooLarge):
        build_operators(HilbertConfig(N=2, n_ph=7, M=4))


def test_compare_identical_and_mismatched():
    t = np.linspace(0, 1, 11)
    a = Trajectory(t, ["x"], np.sin(t)[:, None])
    assert compare_meanfield(a, a) == {"x": (0.0, None)}
    b = Trajectory(t[:5], ["x"], np.sin(t[:5])[:, None])
    with pytest.raises(GridMismatch):
        compare_meanfield(a, b)
    c = Trajectory(t, ["x"], (np.sin(t) + 1e-3 * t)[:, None])
    dev, first = compare_meanfield(a, c)["x"]
    assert dev == pytest.approx(1e-3) and first == pytest.approx(0.1)


def test_auto_cutoff_grows_until_edge_empty():
    def build(n):
        return _model(n_ph=n, cavity=CavitySpec(kappa=1.0), drive=DriveSpec(0.5))

    tr = evolve_auto_cutoff(build, lambda m: basis_state(m.ops.cfg, [0], [0]), 5.0, n_ph=2,
                            edge_tol=1e-6, stride=50)
    assert tr.meta["edge_pop"] < 1e-6 and tr.meta["n_ph"] > 2
    assert "_edge" not in tr.names


def test_sme_hygiene_and_zero_gain_mean():
    m = _model(n_ph=2, cavity=CavitySpec(kappa=1.0), drive=DriveSpec(0.2))
    add_feedback(m, sigma_x(m.ops), FeedbackSpec(g_f=0.0))
    rho0 = basis_state(m.ops.cfg, [1], [0])
    det = evolve(m, rho0, 2.0, dt=0.005, stride=40, names=["pop_1", "photon"])
    t, mean, se = sme_ensemble(m, rho0, 2.0, 0.005, 400, 5, ["pop_1", "photon"], stride=40)
    np.testing.assert_allclose(t, det.t)
    assert np.all(np.abs(mean - det.data) <= 4 * se + 2e-3)
