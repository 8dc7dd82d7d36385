import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import expm

from nmq.errors import DivergentTail, EmptySet, PreconditionViolated
from nmq.kernel import KernelParams, KernelState, integrate_kernel
from nmq.stability import (StabilityReport, bibo_probe, corollary_report, decay_integral,
                           invariant_set_bound, invariant_set_probe, kernel_jacobian, log_norm,
                           lyapunov_rate, pi_plus, transition_matrix, transition_norms, ues_fit)

CRIT = KernelParams(1.0, 2.0, 1.0)


@pytest.mark.parametrize("A,expected", [
    (np.diag([-1.0, -2.0]), -1.0),
    ([[0.0, 1.0], [-1.0, 0.0]], 0.0),
    ([[-1.0, 2.0], [0.0, -1.0]], 0.0),
])
def test_log_norm_examples(A, expected):
    assert log_norm(A) == pytest.approx(expected, abs=1e-14)


mats = arrays(np.float64, (3, 3), elements=st.floats(-10, 10))


@given(mats, mats)
def test_log_norm_subadditive(A, B):
    assert log_norm(A + B) <= log_norm(A) + log_norm(B) + 1e-9


def test_pi_plus_constant():
    assert pi_plus(lambda t: -np.eye(2), 0.0, 2.0, 0.01) == pytest.approx(-2.0)
    assert pi_plus(lambda t: np.array([[0, 3.0], [-3.0, 0]]), 0.0, 1.7, 0.01) == pytest.approx(0.0)
    with pytest.raises(PreconditionViolated):
        pi_plus(lambda t: -np.eye(2), 0.0, 1.0, 0.3)


def test_decay_integral_examples():
    assert decay_integral(lambda t: np.zeros((2, 2)), 5.0) == (0.0, 0.0)
    head, total = decay_integral(lambda t: np.exp(-t) * np.eye(2), 20.0, 0.01)
    assert head == pytest.approx(np.sqrt(2) * (1 - np.exp(-20.0)), rel=1e-8)
    assert total == pytest.approx(np.sqrt(2.0), rel=1e-8)
    with pytest.raises(DivergentTail):
        decay_integral(lambda t: np.eye(2), 5.0, 0.01, params=[KernelParams(1.0, 2.0, 4.0)])
    with pytest.raises(DivergentTail):
        decay_integral(lambda t: np.exp(0.1 * t) * np.eye(2), 5.0, 0.01)


def test_transition_matrix_vs_expm():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4))
    Phi = transition_matrix(lambda t: A, 0.0, 1.5, 1e-3)
    np.testing.assert_allclose(Phi, expm(1.5 * A), atol=1e-9)
    np.testing.assert_array_equal(transition_matrix(lambda t: np.zeros((3, 3)), 0, 2.0), np.eye(3))


def test_transition_cocycle():
    A = lambda t: np.array([[-0.5, np.sin(t)], [-np.cos(2 * t), -0.3]])
    P20 = transition_matrix(A, 0.0, 2.0, 1e-3)
    P21 = transition_matrix(A, 1.2, 2.0, 1e-3)
    P10 = transition_matrix(A, 0.0, 1.2, 1e-3)
    np.testing.assert_allclose(P20, P21 @ P10, atol=1e-8)


def test_pi_plus_bounds_growth():
    A = lambda t: np.array([[-0.2 + np.cos(t), 1.0], [-1.0, -0.4]])
    for T in (1.0, 3.0, 6.0):
        growth = np.linalg.norm(transition_matrix(A, 0.0, T, 1e-3), 2)
        assert growth <= np.exp(pi_plus(A, 0.0, T, 0.01)) * (1 + 1e-6)


def test_ues_fit():
    t, n = transition_norms(lambda t: -np.eye(2), 0.0, 5.0, 0.01, 10)
    fit = ues_fit(t, n)
    assert fit.fitted and fit.alpha == pytest.approx(1.0, abs=1e-6)
    assert fit.K == pytest.approx(1.0, abs=1e-6)
    assert not ues_fit(t, np.exp(0.3 * t)).fitted
    with pytest.raises(PreconditionViolated):
        ues_fit(t[:5], n[:5])


def test_kernel_jacobian_examples():
    np.testing.assert_array_equal(kernel_jacobian(KernelState(0, 0), CRIT), -2 * np.eye(2))
    J = kernel_jacobian(KernelState(0, 0), KernelParams(1.0, 2.0, 1.0, 3.0))
    np.testing.assert_array_equal(J, [[-2, 3], [-3, -2]])
    # along the critical trajectory, kappa R - gamma < 0 throughout
    t, F = integrate_kernel(CRIT, 10.0, 0.01)
    for f in F[::50]:
        sym = kernel_jacobian(KernelState(f.real, f.imag), CRIT)
        assert np.all(np.linalg.eigvalsh(0.5 * (sym + sym.T)) < 0)


def test_lyapunov_rate():
    V, dV = lyapunov_rate(KernelState(1.0, 0.0), CRIT)
    assert V == 0 and dV == 0
    t, F = integrate_kernel(CRIT, 10.0, 0.01)
    for f in F[1::50]:
        V, dV = lyapunov_rate(KernelState(f.real, f.imag), CRIT)
        assert dV < 0
    V, dV = lyapunov_rate(KernelState(5.0, 0.0), CRIT)
    assert dV > 0


@given(st.floats(0.1, 3.0), st.floats(0.2, 5.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0),
       st.floats(-4.0, 4.0))
def test_lyapunov_rate_closed_form(kappa, gamma, R, I, u):
    p = KernelParams(kappa, gamma, 0.7, u)
    V, dV = lyapunov_rate(KernelState(R, I), p)
    assert dV == pytest.approx(2 * (2 * kappa * R - gamma) * V, rel=1e-9, abs=1e-12)


def test_invariant_set_bound():
    assert invariant_set_bound(CRIT) == pytest.approx(2.0)
    with pytest.raises(EmptySet):
        invariant_set_bound(KernelParams(1.0, 2.0, 2.0))
    bounds = [invariant_set_bound(KernelParams(1.0, g, 1.0)) for g in (1.5, 2.0, 4.0, 8.0)]
    assert np.all(np.diff(bounds) > 0)


def test_invariant_probe_small():
    res = invariant_set_probe(CRIT, n_samples=20, t_end=10.0, seed=1)
    assert res.exits == 0 and res.max_V <= 2.0 * (1 + 1e-9)


def test_bibo_examples():
    rep = bibo_probe(CRIT, 0.0, n_samples=10, t_end=200.0, starts="zero")
    assert rep.verdict == "stable"
    assert rep.values["beta_X"] == pytest.approx(1.0, abs=1e-2)
    rep = bibo_probe(CRIT, 0.2, n_samples=100, t_end=50.0)
    assert rep.verdict == "stable"
    assert bibo_probe(KernelParams(1.0, 2.0, 4.0), 0.2).verdict == "inconclusive"


def test_report_serialization():
    rep = StabilityReport("x", "abc", {"a": np.float64(1.5), "b": [1, 2]}, "stable", 1e-9)
    d = json.loads(rep.to_json())
    assert d["values"]["a"] == 1.5 and d["verdict"] == "stable"
    assert "stable" in rep.to_text()


def test_corollary_report_simple():
    Abar = lambda t: np.array([[-1.0, 0.5 * np.sin(t)], [-0.5 * np.sin(t), -1.0]])
    Atil = lambda t: np.exp(-t) * np.eye(2)
    h = 2 * np.pi / 600
    rep = corollary_report(Abar, Atil, 2 * np.pi, h, 3000 * h, margin=0.05)
    assert rep.verdict == "stable"
    assert rep.values["pi_plus"] == pytest.approx(-2 * np.pi, rel=1e-8)
    rep = corollary_report(lambda t: np.eye(2), Atil, 1.0, 0.01, 5.0)
    assert rep.verdict == "inconclusive"
