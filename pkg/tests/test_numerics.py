import numpy as np
import pytest
from hypothesis import given, strategies as st

from nmq.errors import ConfigError, NonFiniteRhs
from nmq.numerics import (RngStream, StepperConfig, Welford, em_step, ensemble, integrate,
                          rk4_step, spawn_streams, wiener_block)


def test_rk4_exponential():
    t, y = integrate(lambda t, y: -y, np.array([1.0]), 0.0, 0.01, 100)
    assert abs(y[-1, 0] - np.exp(-1.0)) < 1e-9
    assert t[-1] == pytest.approx(1.0)


def test_rk4_order():
    f = lambda t, y: np.array([np.cos(t) * y[0]])
    exact = np.exp(np.sin(2.0))
    errs = []
    hs = [0.1, 0.05, 0.025, 0.0125]
    for h in hs:
        _, y = integrate(f, np.array([1.0]), 0.0, h, int(round(2.0 / h)))
        errs.append(abs(y[-1, 0] - exact))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - 4.0) < 0.2


def test_rotation_norm_preserved():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    _, y = integrate(lambda t, y: A @ y, np.array([1.0, 0.0]), 0.0, 0.01, 1000)
    assert abs(np.linalg.norm(y[-1]) - 1.0) < 1e-9


def test_nonfinite_rhs():
    with pytest.raises(NonFiniteRhs):
        rk4_step(lambda t, y: y * np.nan, np.ones(2), 0.0, 0.1)


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(dt=0.1, horizon=0.01), dict(stride=0),
                                dict(scheme="Euler")])
def test_stepper_config_rejects(kw):
    with pytest.raises(ConfigError):
        StepperConfig(**kw)


def test_stepper_times():
    sc = StepperConfig(0.01, 1.0, 10)
    assert sc.n_steps == 100
    np.testing.assert_allclose(sc.times(), np.arange(11) * 0.1)


def test_em_brownian_variance():
    dt, n, T = 0.01, 4000, 1.0
    dW = wiener_block(5, n, int(T / dt), dt)
    y = np.zeros(n)
    for k in range(dW.shape[1]):
        y = em_step(lambda t, y: 0.0 * y, lambda t, y: np.ones_like(y), y, k * dt, dt, dW[:, k])
    assert abs(y.var() - T) < 5 * np.sqrt(2.0 / n) * T


def test_wiener_moments():
    dt = 0.01
    dW = wiener_block(1, 200, 500, dt).ravel()
    se = np.sqrt(dt / dW.size)
    assert abs(dW.mean()) < 4 * se
    assert abs(dW.var() - dt) < 4 * dt * np.sqrt(2.0 / dW.size)


def test_em_weak_order():
    # geometric Brownian motion, E[X_T] = exp(a T)
    a, b, T = 1.0, 0.5, 1.0
    errs = []
    hs = [0.2, 0.1, 0.05]
    for h in hs:
        n = int(round(T / h))
        dW = wiener_block(9, 20000, n, h)
        x = np.ones(20000)
        for k in range(n):
            x = em_step(lambda t, y: a * y, lambda t, y: b * y, x, k * h, h, dW[:, k])
        errs.append(abs(x.mean() - np.exp(a * T)))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 0.7 < slope < 1.3


def test_streams_match_rng_stream():
    gens = spawn_streams(42, 3)
    np.testing.assert_array_equal(gens[2].standard_normal(5), RngStream(42, 2).normal(5))
    assert not np.array_equal(RngStream(42, 0).normal(5), RngStream(42, 1).normal(5))


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
def test_welford_matches_numpy(xs):
    w = Welford()
    for x in xs:
        w.push([x])
    assert w.mean[0] == pytest.approx(np.mean(xs), abs=1e-9)
    assert w.variance[0] == pytest.approx(np.var(xs, ddof=1), rel=1e-7, abs=1e-7)


def test_ensemble_single_run():
    m, se = ensemble(lambda s: np.array([float(s % 7)]), 1, seed=3)
    assert se[0] == 0.0
    m2, _ = ensemble(lambda s: np.array([float(s % 7)]), 1, seed=3)
    assert m[0] == m2[0]
    with pytest.raises(ConfigError):
        ensemble(lambda s: s, 0)
