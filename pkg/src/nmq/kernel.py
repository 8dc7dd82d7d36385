"""Memory-kernel coefficients F(t) of the non-Markovian decay channels.

Each channel obeys the Riccati equation

    dF/dt = kappa F^2 + Q F + S,   Q = -(gamma + i u),  S = gamma chi / 2,

with u = Omega - omega_tilde the detuning between the environment centre
frequency and the transition. Writing F = R + iI gives the real system used by
the stability tools.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (DetunedUnsupported, IndexOutOfRange, NoSteadyValue,
                     PoleHit)
from .model import AtomSpec, EnvSpec

BLOWUP = 1e6
DISC_TOL = 1e-12


class RegimeTag(enum.Enum):
    SubCritical = "SubCritical"
    Critical = "Critical"
    SuperCritical = "SuperCritical"
    Detuned = "Detuned"


@dataclass(frozen=True)
class KernelParams:
    kappa: float
    gamma: float
    chi: float
    u: float = 0.0

    @property
    def Q(self) -> complex:
        return complex(-self.gamma, -self.u)

    @property
    def S(self) -> float:
        return 0.5 * self.gamma * self.chi

    @property
    def D(self) -> float:
        """Resonant discriminant 4 kappa S - Re(Q)^2."""
        return 4.0 * self.kappa * self.S - self.gamma ** 2

    @property
    def regime(self) -> RegimeTag:
        if abs(self.u) > DISC_TOL:
            return RegimeTag.Detuned
        d = self.D
        if d < -DISC_TOL:
            return RegimeTag.SubCritical
        if d > DISC_TOL:
            return RegimeTag.SuperCritical
        return RegimeTag.Critical

    def resonant(self) -> "KernelParams":
        return KernelParams(self.kappa, self.gamma, self.chi, 0.0)


@dataclass(frozen=True)
class KernelState:
    R: float
    I: float
    t: float = 0.0

    @property
    def F(self) -> complex:
        return complex(self.R, self.I)


def params_from(gamma, Omega, omega_tilde, kappa, chi) -> KernelParams:
    return KernelParams(float(kappa), float(gamma), float(chi), float(Omega - omega_tilde))


def derive_params(atom: AtomSpec, env: EnvSpec, n: int) -> KernelParams:
    """Kernel constants for transition ``n`` (1-based, 1 <= n <= N-1)."""
    if not (1 <= n <= atom.N - 1):
        raise IndexOutOfRange(f"level index n={n} outside 1..{atom.N - 1}")
    wt = atom.transition_freqs[n - 1]
    return params_from(env.gamma, env.Omega, wt, atom.env_couplings[n - 1], atom.kernel_consts[n - 1])


def all_params(atom: AtomSpec, env: EnvSpec) -> list[KernelParams]:
    return [derive_params(atom, env, n) for n in range(1, atom.N)]


def riccati_rhs(F, p: KernelParams):
    return p.kappa * F * F + p.Q * F + p.S


def kernel_rhs(state: KernelState, params: KernelParams) -> np.ndarray:
    R, I = state.R, state.I
    k, g, u = params.kappa, params.gamma, params.u
    dR = k * (R * R - I * I) - g * R + u * I + params.S
    dI = 2.0 * k * R * I - u * R - g * I
    return np.array([dR, dI])


def markovian_value(chi: float) -> float:
    return 0.5 * chi


def kernel_output(state: KernelState) -> np.ndarray:
    return np.array([state.R + state.I, state.R - state.I])


# -- closed forms ---------------------------------------------------------------

def _linear_solution(t, p: KernelParams, F0):
    Q = p.Q
    Fs = -p.S / Q
    return Fs + (F0 - Fs) * np.exp(Q * t)


def closed_form(t, params: KernelParams, F0: complex = 0.0):
    """Analytic F(t) for the resonant regimes (and the linear kappa = 0 case).

    ``t`` may be a scalar or array; the return value has the same shape.
    Raises :class:`PoleHit` if the solution has a pole inside [0, max(t)].
    """
    p = params
    t = np.asarray(t, dtype=float)
    if p.kappa == 0.0:
        return _linear_solution(t, p, complex(F0))
    if p.regime is RegimeTag.Detuned:
        raise DetunedUnsupported("no closed form for u != 0; integrate numerically")
    if abs(complex(F0).imag) > 0:
        raise DetunedUnsupported("closed forms are real-valued; use a real F0")
    F0 = float(complex(F0).real)
    k, Q, S = p.kappa, -p.gamma, p.S
    tmax = float(np.max(t)) if t.size else 0.0
    regime = p.regime
    if regime is RegimeTag.SubCritical:
        r = np.sqrt(Q * Q - 4.0 * k * S)
        Fs = -(Q + r) / (2.0 * k)
        if F0 == Fs:
            return np.full(t.shape, Fs)
        # F = Fs + (r/k) / (1 - E e^{r t}),  E fixed by F0
        E = 1.0 - (r / k) / (F0 - Fs)
        if 0.0 < E < 1.0:
            tp = -np.log(E) / r
            if tp <= tmax:
                raise PoleHit(f"sub-critical solution has a pole at t={tp:.6g}", t_pole=tp)
        em = np.exp(-r * t)
        return Fs + (r / k) * em / (em - E)
    if regime is RegimeTag.Critical:
        Fc = -Q / (2.0 * k)
        if F0 == Fc:
            return np.full(t.shape, Fc)
        C = -1.0 / (F0 - Fc)
        if C < 0:
            tp = -C / k
            if tp <= tmax:
                raise PoleHit(f"critical solution has a pole at t={tp:.6g}", t_pole=tp)
        return Fc - 1.0 / (k * t + C)
    # super-critical: tangent branch
    w = np.sqrt(S / k - (Q / (2.0 * k)) ** 2)
    C = np.arctan((F0 + Q / (2.0 * k)) / w) / w
    tp = (np.pi / (2.0 * w) - C) / k
    if tp <= tmax:
        raise PoleHit(f"super-critical solution diverges at t={tp:.6g}", t_pole=tp)
    return -Q / (2.0 * k) + w * np.tan(w * (k * t + C))


# -- steady values ---------------------------------------------------------------

def _resonant_steady(p: KernelParams):
    if p.kappa == 0.0:
        return complex(-p.S / p.Q)
    Q = -p.gamma
    disc = Q * Q - 4.0 * p.kappa * p.S
    if disc < -DISC_TOL:
        return None
    return complex(-(Q + np.sqrt(max(disc, 0.0))) / (2.0 * p.kappa))


def _newton(F, p: KernelParams, tol=1e-12, maxit=100):
    for _ in range(maxit):
        f = riccati_rhs(F, p)
        if abs(f) < tol:
            return F
        d = 2.0 * p.kappa * F + p.Q
        if d == 0:
            return None
        step = f / d
        # damping keeps the iterate on the branch it started from
        lam = 1.0
        while lam > 1e-6 and abs(riccati_rhs(F - lam * step, p)) >= abs(f):
            lam *= 0.5
        F = F - lam * step
        if not np.isfinite(F) or abs(F) > BLOWUP:
            return None
    return F if abs(riccati_rhs(F, p)) < 1e-10 else None


def steady_value(params: KernelParams):
    """Limit of F(t) from F(0) = 0, or None when no stable limit exists.

    Resonant case: the stable root of the quadratic when the discriminant
    allows it. Detuned case: damped Newton continued in u from the resonant
    root (or from the linear kappa -> 0 value when the resonant root is
    missing), accepted only if the fixed point is linearly stable.
    """
    p = params
    if p.kappa == 0.0:
        return complex(-p.S / p.Q)
    if p.regime is not RegimeTag.Detuned:
        return _resonant_steady(p)
    seed = _resonant_steady(p.resonant())
    if seed is None:
        seed = complex(p.S / p.gamma)
    F = seed
    for u in np.linspace(0.0, p.u, 41)[1:]:
        F = _newton(F, KernelParams(p.kappa, p.gamma, p.chi, u))
        if F is None:
            return None
    if (2.0 * p.kappa * F + p.Q).real >= 0.0:
        return None
    return complex(F)


def steady_or_raise(params: KernelParams) -> complex:
    v = steady_value(params)
    if v is None:
        raise NoSteadyValue(f"kernel {params} has no steady value")
    return v


def decay_rate(params: KernelParams) -> float:
    """Linear convergence rate towards the steady value (0 when marginal)."""
    v = steady_value(params)
    if v is None:
        return 0.0
    return max(-(2.0 * params.kappa * v + params.Q).real, 0.0)


def shifted_state(state: KernelState, Rbar: float) -> np.ndarray:
    return np.array([state.R - Rbar, state.I])


def steady_R(params: KernelParams) -> float:
    """Resonant steady value used to centre shifted coordinates."""
    v = _resonant_steady(params.resonant())
    if v is None:
        raise NoSteadyValue("resonant kernel has no steady value")
    return v.real


def shifted_rhs(Xt, params: KernelParams, Rbar: float) -> np.ndarray:
    """Right-hand side in coordinates centred on the resonant fixed point.

    Splits into the resonant nonlinear part, the constant offset and the
    detuning coupling; for u = 0 and Rbar a fixed point the offset vanishes.
    """
    k, g, u, S = params.kappa, params.gamma, params.u, params.S
    Rt, I = float(Xt[0]), float(Xt[1])
    R = Rt + Rbar
    nonlinear = np.array([k * (R * R - I * I) - g * R - (k * Rbar * Rbar - g * Rbar),
                          2.0 * k * R * I - g * I])
    offset = np.array([S + k * Rbar * Rbar - g * Rbar, -u * Rbar])
    detuning = np.array([u * I, -u * Rt])
    return nonlinear + offset + detuning


# -- integration ------------------------------------------------------------------

def integrate_batch(params: list[KernelParams], t_end: float, dt: float, F0=None,
                    stride: int = 1, blowup: float = BLOWUP):
    """Integrate independent kernels; returns (t, F[n_out, B], hit_steps)."""
    B = len(params)
    kap = np.array([p.kappa for p in params], dtype=float)
    Q = np.array([p.Q for p in params], dtype=np.complex128)
    S = np.array([p.S for p in params], dtype=np.complex128)
    F0 = np.zeros(B, dtype=np.complex128) if F0 is None else np.asarray(F0, dtype=np.complex128).reshape(B)
    n_steps = int(round(t_end / dt))
    out, hit = _kernels.riccati_rk4_batch(F0, kap.astype(np.complex128), Q, S, float(dt),
                                          n_steps, int(stride), float(blowup))
    t = np.arange(out.shape[0]) * dt * stride
    return t, out, hit


def integrate_kernel(params: KernelParams, t_end: float, dt: float = 0.01, F0: complex = 0.0,
                     stride: int = 1):
    """RK4 trajectory of one kernel; raises PoleHit when |F| passes 1e6."""
    t, F, hit = integrate_batch([params], t_end, dt, [F0], stride)
    if hit[0] >= 0:
        raise PoleHit(f"|F| exceeded {BLOWUP:g} at t={hit[0] * dt:.6g}", t_pole=hit[0] * dt)
    return t, F[:, 0]
