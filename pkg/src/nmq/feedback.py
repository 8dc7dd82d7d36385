"""Homodyne measurement feedback on a single cavity.

Two closed models are provided:

* quadrature feedback G = beta_x x + beta_p p acting on the cavity; the means
  (<x>, <p>, <s-_n>, <a>) are driven by the Gaussian moments (V_x, V_xp, V_p);
* sigma_x feedback on a two-level atom in the semiclassical variables
  (alpha, s, w) = (<a>, <s->, <s_z>).

In stochastic mode the measurement noise enters as Wiener increments dW and
trajectories are stepped with Euler-Maruyama; deterministic mode sets the noise
to zero and uses RK4. Memory kernels and moments are deterministic and are
precomputed on a half-step grid so both modes see identical values.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as _k
from .errors import ConfigError, NormalizationViolated, ZeroGain
from .kernel import KernelParams, all_params, params_from
from .ltv import Trajectory
from .model import AtomSpec, CavitySpec, DriveSpec, EnvSpec, FeedbackSpec, validate
from .numerics import Welford, spawn_streams

SQ2 = np.sqrt(2.0)


@dataclass
class GaussianMoments:
    V_x: float = 0.5
    V_xp: float = 0.0
    V_p: float = 0.5

    def as_array(self):
        return np.array([self.V_x, self.V_xp, self.V_p], float)

    def uncertainty_ok(self, tol=1e-6) -> bool:
        return self.V_x * self.V_p - self.V_xp ** 2 >= 0.25 - tol


@dataclass
class QuadratureState:
    x: float
    p: float
    s: np.ndarray
    a: complex

    def __post_init__(self):
        self.s = np.atleast_1d(np.asarray(self.s, complex))

    @classmethod
    def from_a(cls, a: complex, s):
        return cls(SQ2 * a.real, SQ2 * a.imag, s, complex(a))

    def pack(self) -> np.ndarray:
        L = len(self.s)
        y = np.empty(2 * L + 4)
        y[0], y[1] = self.x, self.p
        y[2:2 + 2 * L:2] = self.s.real
        y[3:3 + 2 * L:2] = self.s.imag
        y[-2], y[-1] = self.a.real, self.a.imag
        return y

    @classmethod
    def unpack(cls, y):
        L = (len(y) - 4) // 2
        return cls(y[0], y[1], y[2:2 + 2 * L:2] + 1j * y[3:3 + 2 * L:2], complex(y[-2], y[-1]))

    def consistency_error(self) -> float:
        return max(abs(self.x - SQ2 * self.a.real), abs(self.p - SQ2 * self.a.imag))


@dataclass
class SemiclassicalTwoLevel:
    alpha: complex
    s: complex
    w: float

    def normalization(self) -> float:
        return self.w ** 2 + 4.0 * abs(self.s) ** 2

    def pack(self):
        return np.array([self.alpha, self.s, self.w], complex)

    @classmethod
    def unpack(cls, y):
        return cls(complex(y[0]), complex(y[1]), float(np.real(y[2])))


@dataclass(frozen=True)
class NoiseRecord:
    """Enough to regenerate every Wiener increment of an ensemble bit-for-bit."""

    seed: int
    n_traj: int
    n_steps: int
    dt: float

    _FMT = "<4sIQQQd"
    _MAGIC = b"NMQN"

    def increments(self) -> np.ndarray:
        out = np.empty((self.n_traj, self.n_steps))
        for i, g in enumerate(spawn_streams(self.seed, self.n_traj)):
            out[i] = np.sqrt(self.dt) * g.standard_normal(self.n_steps)
        return out

    def to_bytes(self) -> bytes:
        return struct.pack(self._FMT, self._MAGIC, 1, self.seed, self.n_traj, self.n_steps, self.dt)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "NoiseRecord":
        magic, ver, seed, n, steps, dt = struct.unpack(cls._FMT, raw[:struct.calcsize(cls._FMT)])
        if magic != cls._MAGIC or ver != 1:
            raise ConfigError("not a noise record file")
        return cls(seed, n, steps, dt)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


@dataclass
class EnsembleResult:
    t: np.ndarray
    names: list
    mean: np.ndarray
    stderr: np.ndarray
    noise: Optional[NoiseRecord] = None
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name):
        i = self.names.index(name)
        return self.mean[:, i], self.stderr[:, i]


# -- pointwise right-hand sides -------------------------------------------------------

def homodyne_current(x_mean: float, xi: float, eta: float = 1.0) -> float:
    if not (0 < eta <= 1):
        raise ConfigError("eta must lie in (0, 1]")
    return SQ2 * x_mean + xi / np.sqrt(eta)


def _moments(m):
    return m.as_array() if isinstance(m, GaussianMoments) else np.asarray(m, float)


def variance_rhs(moments, kappa: float, Delta: float = 0.0, g_f: float = 0.0,
                 beta_x: float = 0.0, beta_p: float = 0.0) -> np.ndarray:
    """(dV_x, dV_xp, dV_p) of the conditional Gaussian moments."""
    return _k.variance_rhs(_moments(moments), float(kappa), float(Delta), float(g_f),
                           float(beta_x), float(beta_p))


def noise_cancelling_gains(moments, g_f: float):
    """Quadrature gains (beta_x, beta_p) that remove the dW terms from <x>, <p>."""
    if g_f == 0:
        raise ZeroGain("noise cancellation needs g_f != 0")
    Vx, Vxp, _ = _moments(moments)
    return SQ2 * Vxp / g_f, -SQ2 * (Vx - 0.5) / g_f


def _cav_par(cavity, drive, fb):
    return np.array([cavity.kappa, drive.detuning, drive.amplitude, fb.g_f, fb.beta_x,
                     fb.beta_p, cavity.kappa_c], float)


def cavity_feedback_rhs(state: QuadratureState, moments, F, atom: AtomSpec, cavity: CavitySpec,
                        drive: DriveSpec, fb: FeedbackSpec, t: float = 0.0, Fa: complex = 0.0):
    """Drift and dW coefficient for (<x>, <p>, <s-_n>, <a>).

    Returns two :class:`QuadratureState` objects. The dW coefficient of <a> is
    the Gaussian closure (V_x - 1/2 + i V_xp) plus the feedback noise.
    """
    atom = validate(atom)
    y = state.pack()
    drift = np.empty_like(y)
    diff = np.empty_like(y)
    F = np.asarray(F, complex).reshape(-1)
    _k.cavity_fb_terms(float(t), y, _moments(moments), F, complex(Fa),
                       np.asarray(atom.couplings), np.asarray(atom.detunings),
                       np.asarray(atom.env_couplings), _cav_par(validate(cavity), validate(drive),
                                                                validate(fb)), drift, diff)
    return QuadratureState.unpack(drift), QuadratureState.unpack(diff)


def _atomic_par(atom, cavity, drive, fb):
    return np.array([atom.couplings[0], atom.detunings[0], atom.env_couplings[0], cavity.kappa,
                     cavity.kappa_c, drive.amplitude, fb.g_f, drive.detuning], float)


def atomic_feedback_rhs(state: SemiclassicalTwoLevel, F1: complex, Fa: complex, atom: AtomSpec,
                        cavity: CavitySpec, drive: DriveSpec, fb: FeedbackSpec, t: float = 0.0):
    """Drift and dW coefficient of (alpha, s, w) under sigma_x feedback.

    The cavity amplitude damps at kappa/2 (Markovian part) plus kappa_c F_a(t)
    (non-Markovian part).
    """
    atom = validate(atom)
    if atom.N != 2:
        raise ConfigError("atomic feedback is defined for a two-level atom")
    drift = np.empty(3, complex)
    diff = np.empty(3, complex)
    _k.atomic_fb_terms(float(t), state.pack(), complex(F1), complex(Fa),
                       _atomic_par(atom, validate(cavity), validate(drive), validate(fb)), drift, diff)
    return SemiclassicalTwoLevel.unpack(drift), SemiclassicalTwoLevel.unpack(diff)


# -- simulation ----------------------------------------------------------------------------------

def _kernel_grids(atom, env, cavity, dt, n_steps):
    ps = all_params(atom, env)
    kk = np.array([p.kappa for p in ps], complex)
    Q = np.array([p.Q for p in ps], complex)
    S = np.array([p.S for p in ps], complex)
    Fg = _k.kernel_grid(np.zeros(len(ps), complex), kk, Q, S, dt, n_steps)
    if cavity.kappa_c:
        wc = cavity.freq if cavity.freq is not None else env.Omega
        pa = params_from(env.gamma, env.Omega, wc, 1.0, cavity.chi_a)
        # the cavity kernel's own quadratic coefficient is its coupling kappa_c
        pa = KernelParams(cavity.kappa_c, pa.gamma, pa.chi, pa.u)
        Fag = _k.kernel_grid(np.zeros(1, complex), np.array([pa.kappa], complex),
                             np.array([pa.Q]), np.array([pa.S], complex), dt, n_steps)[:, 0]
    else:
        Fag = np.zeros(2 * n_steps + 1, complex)
    return Fg, Fag


def _cavity_names(L):
    names = ["x", "p"]
    for n in range(1, L + 1):
        names += [f"s_re_{n}", f"s_im_{n}"]
    return names + ["a_re", "a_im"]


ATOMIC_NAMES = ["a_re", "a_im", "s_re", "s_im", "w", "pop_1"]


def _atomic_columns(y):
    y = np.asarray(y)
    w = y[..., 2].real
    return np.stack([y[..., 0].real, y[..., 0].imag, y[..., 1].real, y[..., 1].imag, w,
                     0.5 * (w + 1.0)], axis=-1)


def simulate_feedback(model: str, atom: AtomSpec, env: EnvSpec, cavity: CavitySpec,
                      drive: DriveSpec, fb: FeedbackSpec, initial, t_end: float,
                      dt: float = 0.01, stride: int = 10, moments=None,
                      mode: str = "deterministic", n_traj: int = 1, seed: int = 0,
                      batch: int = 256):
    """Integrate a feedback model.

    ``model`` is ``"cavity"`` (quadrature feedback, ``initial`` a
    QuadratureState) or ``"atomic"`` (sigma_x feedback, ``initial`` a
    SemiclassicalTwoLevel). Deterministic mode returns a Trajectory; stochastic
    mode returns an :class:`EnsembleResult` with per-time mean and stderr.
    """
    atom, env, cavity, drive, fb = (validate(atom), validate(env), validate(cavity),
                                    validate(drive), validate(fb))
    n_steps = int(round(t_end / dt))
    Fg, Fag = _kernel_grids(atom, env, cavity, dt, n_steps)
    meta = {"model": model, "dt": dt, "stride": stride}
    if model == "cavity":
        if not isinstance(initial, QuadratureState):
            raise ConfigError("cavity model needs a QuadratureState")
        m0 = GaussianMoments() if moments is None else moments
        m0 = _moments(m0)
        Mg = _k.moment_grid(m0, cavity.kappa, drive.detuning, fb.g_f, fb.beta_x, fb.beta_p, dt, n_steps)
        g = np.asarray(atom.couplings)
        dl = np.asarray(atom.detunings)
        kap = np.asarray(atom.env_couplings)
        par = _cav_par(cavity, drive, fb)
        y0 = initial.pack()
        names = _cavity_names(atom.N - 1) + ["V_x", "V_xp", "V_p"]
        mom = Mg[::2][::stride]
        meta["closure"] = "gaussian"
        if mode == "deterministic":
            ys = _k.cavity_fb_rk4(y0, Mg, Fg, Fag, g, dl, kap, par, dt, n_steps, stride)
            t = np.arange(ys.shape[0]) * dt * stride
            return Trajectory(t, names, np.hstack([ys, mom[:len(t)]]), Fg[::2][::stride], meta)
        runner = lambda dW: _k.cavity_fb_em(y0, Mg, Fg, Fag, g, dl, kap, par, dt, dW, stride)
        post = lambda arr: np.concatenate([arr, np.broadcast_to(mom[:arr.shape[1]], arr.shape[:2] + (3,))], axis=-1)
    elif model == "atomic":
        if not isinstance(initial, SemiclassicalTwoLevel):
            raise ConfigError("atomic model needs a SemiclassicalTwoLevel state")
        if abs(initial.normalization() - 1.0) > 1e-9:
            raise NormalizationViolated(f"w^2 + 4|s|^2 = {initial.normalization():.12g} != 1")
        par = _atomic_par(atom, cavity, drive, fb)
        y0 = initial.pack()
        F1g = Fg[:, 0].copy()
        names = list(ATOMIC_NAMES)
        meta["closure"] = "higher-order stochastic term of <a> omitted"
        if mode == "deterministic":
            ys = _k.atomic_fb_rk4(y0, F1g, Fag, par, dt, n_steps, stride)
            t = np.arange(ys.shape[0]) * dt * stride
            return Trajectory(t, names, _atomic_columns(ys), Fg[::2][::stride], meta)
        runner = lambda dW: _k.atomic_fb_em(y0, F1g, Fag, par, dt, dW, stride)
        post = _atomic_columns
    else:
        raise ConfigError(f"unknown feedback model {model!r}")
    if mode != "stochastic":
        raise ConfigError(f"mode must be 'deterministic' or 'stochastic', got {mode!r}")
    if n_traj < 1:
        raise ConfigError("n_traj must be >= 1")
    record = NoiseRecord(int(seed), int(n_traj), n_steps, float(dt))
    gens = spawn_streams(seed, n_traj)
    acc = Welford()
    for b0 in range(0, n_traj, batch):
        dW = np.sqrt(dt) * np.stack([g.standard_normal(n_steps) for g in gens[b0:b0 + batch]])
        arr = post(runner(dW))
        for row in arr:
            acc.push(row)
    t = np.arange(acc.mean.shape[0]) * dt * stride
    return EnsembleResult(t, names, acc.mean, acc.stderr, record, meta)
