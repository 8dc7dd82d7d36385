"""Mean-value dynamics of an N-level atom in a single cavity.

State layout (complex form), per transition n = 1..N-1:

    [pop_n, coh_n, conj(coh_n)] ... , photon

with pop_n = <s+_n s-_n>, coh_n = <s+_n a>. The real form replaces
(coh_n, conj(coh_n)) by (Re coh_n, Im coh_n). The driven form appends
<s-_n> = s_n^R + i s_n^I to each level and (R_a, I_a) = (<a + a^+>, i<a - a^+>)
after the photon number. The ground population is carried alongside as a
normalization check.

Coupling phases follow the interaction picture: g~_n(t) = g_n exp(i Delta_n t).
Memory kernels enter through K_n = kappa_n F_n; a Markovian cavity loss
``kappa`` (photon rate) is optional.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels as _k
from .errors import (CouplingNotZero, KernelDiverged, NegativePopulation,
                     NoSteadyValue, NormalizationDrift, ConfigError)
from .kernel import BLOWUP, all_params, steady_value
from .model import AtomSpec, CavitySpec, DriveSpec, EnvSpec, validate

NORM_FAIL = 1e-4
NEG_TOL = 1e-6


@dataclass
class SingleCavityState:
    pop: Sequence[float]
    coh: Sequence[complex]
    photon: float = 0.0
    ground: Optional[float] = None

    def __post_init__(self):
        self.pop = np.atleast_1d(np.asarray(self.pop, dtype=float))
        self.coh = np.atleast_1d(np.asarray(self.coh, dtype=complex))
        if self.ground is None:
            self.ground = 1.0 - float(np.sum(self.pop))


@dataclass
class DrivenState(SingleCavityState):
    s: Sequence[complex] = None
    R_a: float = 0.0
    I_a: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        L = len(self.pop)
        self.s = np.zeros(L, complex) if self.s is None else np.atleast_1d(np.asarray(self.s, dtype=complex))


@dataclass
class Trajectory:
    """Samples at times ``t``; ``data[:, j]`` is observable ``names[j]``."""

    t: np.ndarray
    names: list
    data: np.ndarray
    kernels: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.data[:, self.names.index(name)]

    def columns(self):
        """Observable columns followed by kernel R_n, I_n columns."""
        names = list(self.names)
        cols = [self.data]
        if self.kernels is not None:
            for n in range(self.kernels.shape[1]):
                names += [f"R_{n + 1}", f"I_{n + 1}"]
            ker = np.empty((len(self.t), 2 * self.kernels.shape[1]))
            ker[:, 0::2] = self.kernels.real
            ker[:, 1::2] = self.kernels.imag
            cols.append(ker)
        return names, np.hstack(cols)


# -- helpers ---------------------------------------------------------------------

def _atom_arrays(atom: AtomSpec):
    atom = validate(atom)
    g = np.asarray(atom.couplings, float)
    Delta = np.asarray(atom.detunings, float)
    kap = np.asarray(atom.env_couplings, float)
    return atom, g, Delta, kap


def _kernel_arrays(atom, env):
    ps = all_params(atom, env)
    kk = np.array([p.kappa for p in ps], dtype=np.complex128)
    Q = np.array([p.Q for p in ps], dtype=np.complex128)
    S = np.array([p.S for p in ps], dtype=np.complex128)
    return ps, kk, Q, S


def _F(kernel, L):
    """Accept a KernelState-like object, a complex array, or a scalar."""
    if hasattr(kernel, "F"):
        kernel = kernel.F
    F = np.asarray(kernel, dtype=np.complex128).reshape(-1)
    if F.size == 1 and L > 1:
        F = np.full(L, F[0])
    if F.size != L:
        raise ConfigError(f"expected {L} kernel values, got {F.size}")
    return F


def steady_kernels(atom: AtomSpec, env: EnvSpec) -> np.ndarray:
    vals = [steady_value(p) for p in all_params(atom, env)]
    if any(v is None for v in vals):
        raise NoSteadyValue("at least one kernel has no steady value")
    return np.array(vals, dtype=np.complex128)


# -- assembly --------------------------------------------------------------------

def assemble_complex(t, atom: AtomSpec, kernel, kappa: float = 0.0) -> np.ndarray:
    """Matrix A(t) of the complex mean-value system (dimension 3N-2)."""
    atom, g, Delta, kap = _atom_arrays(atom)
    L = len(g)
    A = np.zeros((3 * L + 2, 3 * L + 2), dtype=np.complex128)
    _k.fill_complex(float(t), _F(kernel, L), g, Delta, kap, float(kappa), A)
    return A[:-1, :-1].copy()


def assemble_real(t, atom: AtomSpec, kernel, kappa: float = 0.0, steady=None):
    """Real-form matrix (dimension 3N-2).

    With ``steady`` (the limiting kernel values) also returns the split
    (A_bar(t), A_tilde(t)): A_bar uses the steady kernels and is periodic in t,
    A_tilde = A - A_bar vanishes as the kernels settle.
    """
    atom, g, Delta, kap = _atom_arrays(atom)
    L = len(g)
    F = _F(kernel, L)
    if np.any(np.abs(F) > BLOWUP) or not np.all(np.isfinite(F)):
        raise KernelDiverged("kernel value beyond the blow-up cap")
    A = np.zeros((3 * L + 2, 3 * L + 2))
    _k.fill_real(float(t), F, g, Delta, kap, float(kappa), A)
    A = A[:-1, :-1].copy()
    if steady is None:
        return A
    Ab = np.zeros_like(A, shape=(3 * L + 2, 3 * L + 2))
    _k.fill_real(float(t), _F(steady, L), g, Delta, kap, float(kappa), Ab)
    Ab = Ab[:-1, :-1].copy()
    return A, Ab, A - Ab


def assemble_driven(t, atom: AtomSpec, kernel, drive: DriveSpec, kappa: float = 0.0):
    """Driven real-form matrix B(t) (dimension 5N-2) and its constant forcing."""
    atom, g, Delta, kap = _atom_arrays(atom)
    drive = validate(drive)
    L = len(g)
    d = 5 * L + 4
    A = np.zeros((d, d))
    b = np.zeros(d)
    _k.fill_driven(float(t), _F(kernel, L), g, Delta, kap, float(kappa), float(drive.amplitude), A, b)
    return A[:-1, :-1].copy(), b[:-1].copy()


def ground_rhs(state: SingleCavityState, kernel, atom: AtomSpec, t: float = 0.0) -> float:
    atom, g, Delta, kap = _atom_arrays(atom)
    F1 = _F(kernel, len(g))[0]
    gt = g[0] * np.exp(1j * Delta[0] * t)
    K = kap[0] * F1
    c = state.coh[0]
    v = (K + np.conj(K)) * state.pop[0] + 1j * gt * c - 1j * np.conj(gt) * np.conj(c)
    return float(v.real)


def population_only(atom: AtomSpec, kernel, steady):
    """Reduced population dynamics dP/dt = (L + P(t)) pop for g = 0.

    L holds the steady decay (diagonal) and feed from the level above
    (super-diagonal); P(t) is the kernel transient and vanishes at steady state.
    """
    atom, g, Delta, kap = _atom_arrays(atom)
    if np.any(g != 0):
        raise CouplingNotZero("population-only reduction requires all couplings g_n = 0")
    n = len(g)
    F = _F(kernel, n)
    Fb = _F(steady, n)
    Lm = np.zeros((n, n))
    P = np.zeros((n, n))
    for i in range(n):
        Lm[i, i] = -2.0 * kap[i] * Fb[i].real
        P[i, i] = 2.0 * kap[i] * (Fb[i].real - F[i].real)
        if i + 1 < n:
            Lm[i, i + 1] = 2.0 * kap[i + 1] * Fb[i + 1].real
            P[i, i + 1] = 2.0 * kap[i + 1] * (F[i + 1].real - Fb[i + 1].real)
    return Lm, P


# -- simulation ------------------------------------------------------------------

def _names(L, driven=False):
    names = []
    for n in range(1, L + 1):
        names += [f"pop_{n}", f"coh_re_{n}", f"coh_im_{n}"]
        if driven:
            names += [f"s_re_{n}", f"s_im_{n}"]
    names.append("photon")
    if driven:
        names += ["R_a", "I_a"]
    names.append("ground")
    return names


def _pack(model, state, L):
    if model == _k.MODEL_COMPLEX:
        z = np.zeros(3 * L + 2, dtype=np.complex128)
        for n in range(L):
            z[3 * n] = state.pop[n]
            z[3 * n + 1] = state.coh[n]
            z[3 * n + 2] = np.conj(state.coh[n])
        z[3 * L] = state.photon
        z[3 * L + 1] = state.ground
        return z
    st = 5 if model == _k.MODEL_DRIVEN else 3
    z = np.zeros(st * L + (4 if model == _k.MODEL_DRIVEN else 2), dtype=np.complex128)
    for n in range(L):
        z[st * n] = state.pop[n]
        z[st * n + 1] = state.coh[n].real
        z[st * n + 2] = state.coh[n].imag
        if model == _k.MODEL_DRIVEN:
            z[st * n + 3] = state.s[n].real
            z[st * n + 4] = state.s[n].imag
    z[st * L] = state.photon
    if model == _k.MODEL_DRIVEN:
        z[st * L + 1] = state.R_a
        z[st * L + 2] = state.I_a
    z[-1] = state.ground
    return z


def _unpack(model, zs, L):
    """Samples in the public column order of :func:`_names`."""
    if model == _k.MODEL_COMPLEX:
        out = np.empty((zs.shape[0], 3 * L + 2))
        for n in range(L):
            out[:, 3 * n] = zs[:, 3 * n].real
            out[:, 3 * n + 1] = zs[:, 3 * n + 1].real
            out[:, 3 * n + 2] = zs[:, 3 * n + 1].imag
        out[:, 3 * L] = zs[:, 3 * L].real
        out[:, 3 * L + 1] = zs[:, 3 * L + 1].real
        return out
    return zs.real.copy()


def _run(model, atom, env, state, t_end, dt, stride, cavity, drive, frozen, F0):
    atom, g, Delta, kap = _atom_arrays(atom)
    env = validate(env)
    L = len(g)
    kcav = 0.0 if cavity is None else float(validate(cavity).kappa)
    E = 0.0 if drive is None else float(validate(drive).amplitude)
    ps, kk, Q, S = _kernel_arrays(atom, env)
    if frozen:
        F0 = steady_kernels(atom, env) if F0 is None else _F(F0, L)
    else:
        F0 = np.zeros(L, np.complex128) if F0 is None else _F(F0, L)
    ground0 = state.ground
    if abs(ground0 + float(np.sum(state.pop)) - 1.0) > NORM_FAIL:
        raise NormalizationDrift("initial state is not normalized")
    z0 = _pack(model, state, L)
    n_steps = int(round(t_end / dt))
    zs, Fs, hit = _k.ltv_rk4(model, z0, F0, kk, Q, S, g, Delta, kap, kcav, E, bool(frozen),
                             float(dt), n_steps, int(stride), BLOWUP)
    if hit >= 0:
        raise KernelDiverged(f"memory kernel or state diverged at t={hit * dt:.6g} ns")
    t = np.arange(zs.shape[0]) * dt * stride
    data = _unpack(model, zs, L)
    traj = Trajectory(t, _names(L, model == _k.MODEL_DRIVEN), data, Fs,
                      meta={"dt": dt, "stride": stride, "frozen": bool(frozen)})
    _check(traj, L)
    return traj


def _check(traj: Trajectory, L):
    total = traj["ground"] + sum(traj[f"pop_{n}"] for n in range(1, L + 1))
    drift = float(np.max(np.abs(total - 1.0)))
    traj.meta["norm_drift"] = drift
    if drift > NORM_FAIL:
        raise NormalizationDrift(f"ground + sum(pop) drifted by {drift:.3g}")
    for name in [f"pop_{n}" for n in range(1, L + 1)] + ["photon"]:
        lo = float(np.min(traj[name]))
        if lo < -NEG_TOL:
            raise NegativePopulation(f"{name} reached {lo:.3g}")


def simulate_single(atom: AtomSpec, env: EnvSpec, state: SingleCavityState, t_end: float,
                    dt: float = 0.01, stride: int = 10, cavity: Optional[CavitySpec] = None,
                    frozen: bool = False, F0=None, form: str = "complex") -> Trajectory:
    """Integrate the undriven mean-value system with its kernels (RK4).

    ``frozen=True`` replaces the kernels by their steady values (Markovian
    comparison). ``form`` selects the complex or real state layout; both give
    the same trajectory.
    """
    model = {"complex": _k.MODEL_COMPLEX, "real": _k.MODEL_REAL}[form]
    return _run(model, atom, env, state, t_end, dt, stride, cavity, None, frozen, F0)


def simulate_driven(atom: AtomSpec, env: EnvSpec, drive: DriveSpec, state: DrivenState,
                    t_end: float, dt: float = 0.01, stride: int = 10,
                    cavity: Optional[CavitySpec] = None, frozen: bool = False, F0=None) -> Trajectory:
    if not isinstance(state, DrivenState):
        state = DrivenState(state.pop, state.coh, state.photon, state.ground)
    return _run(_k.MODEL_DRIVEN, atom, env, state, t_end, dt, stride, cavity, drive, frozen, F0)
