import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nmq.errors import DetunedUnsupported, IndexOutOfRange, NoSteadyValue, PoleHit
from nmq.kernel import (KernelParams, KernelState, RegimeTag, closed_form, decay_rate,
                        derive_params, integrate_batch, integrate_kernel, kernel_output,
                        kernel_rhs, markovian_value, shifted_rhs, shifted_state, steady_R,
                        steady_value)
from nmq.model import AtomSpec, EnvSpec


def _stable_root(p):
    """Independent oracle: root of kappa F^2 + Q F + S with Re(2 kappa F + Q) < 0."""
    r = np.roots([p.kappa, p.Q, p.S])
    r = [z for z in r if (2 * p.kappa * z + p.Q).real < 0]
    return complex(r[0]) if len(r) == 1 else None


def test_derive_params_resonant():
    atom = AtomSpec([0.0, 50.0], [0.1], [1.0], [1.0])
    p = derive_params(atom, EnvSpec(2.0, 50.0), 1)
    assert p.Q == -2 and p.S == 1 and p.D == 0
    assert p.regime is RegimeTag.Critical


def test_derive_params_detuning_and_bounds():
    atom = AtomSpec([0.0, 45.0], [0.1], [1.0], [1.0])
    p = derive_params(atom, EnvSpec(2.0, 50.0), 1)
    assert p.u == 5.0 and p.regime is RegimeTag.Detuned
    with pytest.raises(IndexOutOfRange):
        derive_params(atom, EnvSpec(2.0, 50.0), 2)
    with pytest.raises(IndexOutOfRange):
        derive_params(atom, EnvSpec(2.0, 50.0), 0)


def test_discriminant_subcritical():
    p = KernelParams(1.0, 2.0, 0.5)
    assert p.S == 0.5 and p.D == -2.0 and p.regime is RegimeTag.SubCritical


@pytest.mark.parametrize("R,I,expected", [(0, 0, (1, 0)), (1, 0, (0, 0)), (0, 1, (0, -2))])
def test_kernel_rhs_examples(R, I, expected):
    out = kernel_rhs(KernelState(R, I), KernelParams(1.0, 2.0, 1.0))
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_kernel_rhs_matches_complex_form():
    p = KernelParams(0.7, 2.0, 1.3, 2.5)
    F = 0.3 - 0.4j
    d = kernel_rhs(KernelState(F.real, F.imag), p)
    ref = p.kappa * F * F + p.Q * F + p.S
    assert d[0] == pytest.approx(ref.real) and d[1] == pytest.approx(ref.imag)


@pytest.mark.parametrize("t,expected", [(0.0, 0.0), (1.0, 0.5), (1e9, 1.0)])
def test_critical_closed_form(t, expected):
    p = KernelParams(1.0, 2.0, 1.0)
    assert closed_form(t, p).real == pytest.approx(expected, abs=1e-8)


def test_closed_form_detuned_unsupported():
    with pytest.raises(DetunedUnsupported):
        closed_form(1.0, KernelParams(1.0, 2.0, 1.0, 3.0))


def test_supercritical_pole():
    p = KernelParams(1.0, 2.0, 4.0)
    assert steady_value(p) is None
    with pytest.raises(PoleHit) as info:
        closed_form(np.linspace(0, 10, 101), p)
    assert 0 < info.value.t_pole < 10
    with pytest.raises(PoleHit):
        integrate_kernel(p, 10.0, 0.001)


@pytest.mark.parametrize("chi", [0.3, 0.8])
def test_subcritical_closed_form_vs_rk4(chi):
    p = KernelParams(1.0, 2.0, chi)
    t, F = integrate_kernel(p, 10.0, 1e-3, stride=100)
    np.testing.assert_allclose(F, closed_form(t, p), atol=1e-8)


def test_supercritical_closed_form_before_pole():
    p = KernelParams(1.0, 2.0, 1.5)
    t, F = integrate_kernel(p, 1.0, 1e-3, stride=50)
    np.testing.assert_allclose(F, closed_form(t, p), atol=1e-8)


def test_linear_kernel():
    p = KernelParams(0.0, 2.0, 1.0, 3.0)
    assert steady_value(p) == pytest.approx(1.0 / (2.0 + 3.0j))
    t, F = integrate_kernel(p, 5.0, 1e-3, stride=100)
    np.testing.assert_allclose(F, closed_form(t, p), atol=1e-10)


def test_steady_values():
    assert steady_value(KernelParams(1.0, 2.0, 1.0)) == pytest.approx(1.0)
    assert steady_value(KernelParams(1.0, 2.0, 4.0)) is None
    assert steady_value(KernelParams(0.0, 2.0, 1.0, 0.0)) == pytest.approx(0.5)


@given(st.floats(0.05, 3.0), st.floats(0.5, 10.0), st.floats(0.0, 2.0), st.floats(-8.0, 8.0))
def test_detuned_steady_matches_root_oracle(kappa, gamma, chi, u):
    p = KernelParams(kappa, gamma, chi, u)
    v = steady_value(p)
    ref = _stable_root(p)
    if v is None:
        return
    assert ref is not None
    assert abs(v - ref) < 1e-9 * max(1.0, abs(ref))
    assert np.linalg.norm(kernel_rhs(KernelState(v.real, v.imag), p)) < 1e-10


def test_markovian_value_and_output():
    assert [markovian_value(c) for c in (1.0, 0.0, 2.0)] == [0.5, 0.0, 1.0]
    np.testing.assert_allclose(kernel_output(KernelState(0.3, 0.2)), [0.5, 0.1])
    np.testing.assert_allclose(kernel_output(KernelState(1.0, 0.0)), [1.0, 1.0])


def test_shifted_coordinates():
    p = KernelParams(1.0, 2.0, 1.0)
    Rb = steady_R(p)
    np.testing.assert_allclose(shifted_state(KernelState(1.5, 0.2), 1.0), [0.5, 0.2])
    np.testing.assert_allclose(shifted_rhs(np.zeros(2), p, Rb), [0, 0], atol=1e-15)
    X = np.array([0.3, -0.2])
    np.testing.assert_allclose(shifted_rhs(X, p, Rb),
                               kernel_rhs(KernelState(X[0] + Rb, X[1]), p), atol=1e-14)
    with pytest.raises(NoSteadyValue):
        steady_R(KernelParams(1.0, 2.0, 4.0))


def test_resonant_reality():
    t, F = integrate_kernel(KernelParams(1.0, 2.0, 0.7), 20.0, 0.01)
    assert np.max(np.abs(F.imag)) < 1e-12


def test_markovian_limit_large_gamma():
    p = KernelParams(1.0, 1e3, 1.0)
    assert abs(steady_value(p).real - 0.5) < 2 * p.kappa * p.chi ** 2 / p.gamma


def test_decay_rate_critical_is_zero():
    assert decay_rate(KernelParams(1.0, 2.0, 1.0)) == pytest.approx(0.0, abs=1e-12)
    assert decay_rate(KernelParams(1.0, 2.0, 0.5)) == pytest.approx(math.sqrt(2.0))


def test_batch_equals_single():
    ps = [KernelParams(1.0, 2.0, 0.5, u) for u in (0.0, 1.0, -3.0)]
    t, F, hit = integrate_batch(ps, 5.0, 0.01)
    assert np.all(hit < 0)
    for j, p in enumerate(ps):
        _, Fj = integrate_kernel(p, 5.0, 0.01)
        np.testing.assert_array_equal(F[:, j], Fj)
