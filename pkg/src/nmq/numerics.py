"""Fixed-step integrators, seeded Gaussian streams and ensemble statistics.

Gaussian increments come from numpy's ``Generator(PCG64).standard_normal``,
which uses the ziggurat method. Per-trajectory streams are obtained by spawning
``SeedSequence(master_seed)``, so ``(seed, index)`` fixes a stream exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFiniteRhs, ConfigError

SCHEMES = ("RK4", "EulerMaruyama")


@dataclass(frozen=True)
class StepperConfig:
    dt: float = 0.01
    horizon: float = 10.0
    stride: int = 1
    scheme: str = "RK4"

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not self.horizon >= self.dt:
            raise ConfigError(f"horizon ({self.horizon}) must be >= dt ({self.dt})")
        if int(self.stride) < 1:
            raise ConfigError("stride must be >= 1")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")

    @property
    def n_steps(self) -> int:
        n = int(round(self.horizon / self.dt))
        return max(n, 1)

    def times(self) -> np.ndarray:
        idx = np.arange(0, self.n_steps + 1, self.stride)
        return idx * self.dt


def _finite(v, where):
    if not np.all(np.isfinite(v)):
        raise NonFiniteRhs(f"non-finite right-hand side at {where}")
    return v


def rk4_step(f: Callable, y, t: float, dt: float):
    """Classical four-stage Runge-Kutta step for ``dy/dt = f(t, y)``."""
    k1 = _finite(f(t, y), t)
    k2 = _finite(f(t + 0.5 * dt, y + 0.5 * dt * k1), t + 0.5 * dt)
    k3 = _finite(f(t + 0.5 * dt, y + 0.5 * dt * k2), t + 0.5 * dt)
    k4 = _finite(f(t + dt, y + dt * k3), t + dt)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def em_step(drift: Callable, diffusion: Callable, y, t: float, dt: float, dW):
    """Euler-Maruyama step ``y + a(t,y) dt + b(t,y) dW`` (scalar Wiener)."""
    a = _finite(drift(t, y), t)
    b = _finite(diffusion(t, y), t)
    return y + a * dt + b * dW


def integrate(f: Callable, y0, t0: float, dt: float, n_steps: int, stride: int = 1):
    """RK4 from ``t0`` for ``n_steps``; returns (times, samples every ``stride``)."""
    y = np.array(y0, copy=True)
    out = [y.copy()]
    ts = [t0]
    for k in range(1, n_steps + 1):
        y = rk4_step(f, y, t0 + (k - 1) * dt, dt)
        if k % stride == 0:
            out.append(y.copy())
            ts.append(t0 + k * dt)
    return np.asarray(ts), np.asarray(out)


@dataclass
class RngStream:
    """Single-owner Gaussian stream identified by (master seed, index)."""

    seed: int
    index: int = 0

    def __post_init__(self):
        ss = np.random.SeedSequence(int(self.seed)).spawn(self.index + 1)[self.index]
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def wiener_increments(self, n_steps: int, dt: float) -> np.ndarray:
        return np.sqrt(dt) * self._gen.standard_normal(n_steps)


def spawn_streams(seed: int, n: int) -> list[np.random.Generator]:
    """``n`` independent generators; stream i equals ``RngStream(seed, i)``."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(int(seed)).spawn(n)]


def wiener_block(seed: int, n_traj: int, n_steps: int, dt: float, n_noises: int = 1) -> np.ndarray:
    """Wiener increments of shape (n_traj, n_steps) or (n_traj, n_steps, n_noises)."""
    out = np.empty((n_traj, n_steps, n_noises))
    for i, g in enumerate(spawn_streams(seed, n_traj)):
        out[i] = np.sqrt(dt) * g.standard_normal((n_steps, n_noises))
    return out[..., 0] if n_noises == 1 else out


class Welford:
    """Streaming mean/variance over runs of identical shape."""

    def __init__(self):
        self.n = 0
        self.mean = None
        self._m2 = None

    def push(self, x):
        x = np.asarray(x, dtype=float)
        self.n += 1
        if self.mean is None:
            self.mean = x.copy()
            self._m2 = np.zeros_like(x)
            return
        d = x - self.mean
        self.mean += d / self.n
        self._m2 += d * (x - self.mean)

    @property
    def variance(self):
        if self.n < 2:
            return np.zeros_like(self.mean)
        return self._m2 / (self.n - 1)

    @property
    def stderr(self):
        return np.sqrt(self.variance / self.n)


def ensemble(run: Callable[[int], np.ndarray], n: int, seed: int = 0):
    """Mean and standard error of ``run(stream_seed)`` over ``n`` runs.

    Each run gets a seed drawn from ``SeedSequence(seed)`` children so results
    are deterministic in ``seed``. With ``n == 1`` the stderr is zero.
    """
    if n < 1:
        raise ConfigError("ensemble needs n >= 1")
    acc = Welford()
    for child in np.random.SeedSequence(int(seed)).spawn(n):
        acc.push(run(int(child.generate_state(1)[0])))
    return acc.mean, acc.stderr
