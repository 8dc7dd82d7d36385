"""Coupled-cavity lattice: M cavities in an open chain, one two-level atom each.

Real state X = (sR_1, sI_1, ..., sR_M, sI_M, aR_1, aI_1, ..., aR_M, aI_M) with
s_m = <sigma-_m> and a_m = <a_m>. The mean values obey

    ds_m/dt = -i g_m e^{i delta_m t} a_m - kappa_m^at F_m(t) s_m
    da_m/dt = -i Delta a_m - i g_m e^{-i delta_m t} s_m - kappa a_m
              - i g_f (beta_x^m + i beta_p^m) <x_m> - i J (a_{m-1} + a_{m+1})

where <x_m> = sqrt(2) aR_m and every site has its own memory kernel F_m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import simpson

from . import _kernels as _k
from .errors import (ConfigError, KernelDiverged, NegativeRate, NoSteadyKernel,
                     PreconditionViolated)
from .kernel import BLOWUP, KernelParams, params_from, steady_value
from .ltv import Trajectory
from .stability import StabilityReport, digest, log_norm

SQ2 = math.sqrt(2.0)


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice parameters. Per-site entries accept a scalar (broadcast) or a
    sequence of length M; cavity frequency and decay are shared by all sites."""

    M: int
    J_c: float
    g: tuple
    delta: tuple
    kappa_atom: tuple
    kappa: float
    gamma: float
    Omega: float
    omega_a: tuple
    chi: float = 1.0
    beta_x: tuple = 0.0
    beta_p: tuple = 0.0
    g_f: float = 0.0
    Delta: float = 0.0


def _site(v, M, name, problems):
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.size == 1:
        arr = np.full(M, arr[0])
    if arr.size != M:
        problems.append(f"{name} has {arr.size} entries, expected {M}")
        return tuple(np.resize(arr, M).tolist())
    return tuple(arr.tolist())


def validate_lattice(spec: LatticeSpec) -> LatticeSpec:
    problems = []
    if int(spec.M) < 2:
        raise ConfigError(f"lattice needs M >= 2 cavities, got {spec.M}")
    M = int(spec.M)
    kw = {k: _site(getattr(spec, k), M, k, problems)
          for k in ("g", "delta", "kappa_atom", "omega_a", "beta_x", "beta_p")}
    if problems:
        raise ConfigError("; ".join(problems), problems)
    rates = [("kappa", spec.kappa), ("J_c", abs(spec.J_c)), ("chi", spec.chi)]
    rates += [(f"kappa_atom[{i}]", v) for i, v in enumerate(kw["kappa_atom"])]
    bad = [f"{n} = {v}" for n, v in rates if not (np.isfinite(v) and v >= 0)]
    if not spec.gamma > 0:
        bad.append(f"gamma = {spec.gamma}")
    if bad:
        raise NegativeRate("negative or invalid rate: " + ", ".join(bad), bad)
    return replace(spec, M=M, **kw)


@dataclass
class LatticeState:
    X: np.ndarray
    F: Optional[np.ndarray] = None

    @classmethod
    def from_complex(cls, s, a, F=None):
        s = np.asarray(s, dtype=complex)
        a = np.asarray(a, dtype=complex)
        M = s.size
        X = np.empty(4 * M)
        X[0:2 * M:2], X[1:2 * M:2] = s.real, s.imag
        X[2 * M::2], X[2 * M + 1::2] = a.real, a.imag
        return cls(X, None if F is None else np.asarray(F, dtype=complex))

    @property
    def M(self):
        return self.X.size // 4

    @property
    def s(self):
        M = self.M
        return self.X[0:2 * M:2] + 1j * self.X[1:2 * M:2]

    @property
    def a(self):
        M = self.M
        return self.X[2 * M::2] + 1j * self.X[2 * M + 1::2]


def site_params(spec: LatticeSpec) -> list[KernelParams]:
    spec = validate_lattice(spec)
    return [params_from(spec.gamma, spec.Omega, wa, ka, spec.chi)
            for wa, ka in zip(spec.omega_a, spec.kappa_atom)]


def steady_site_kernels(spec: LatticeSpec) -> np.ndarray:
    vals = [steady_value(p) for p in site_params(spec)]
    if any(v is None for v in vals):
        raise NoSteadyKernel("a site kernel has no steady value")
    return np.array(vals, dtype=complex)


def _arrays(spec, feedback=True):
    g = np.array(spec.g)
    dlt = np.array(spec.delta)
    kap = np.array(spec.kappa_atom)
    if feedback:
        par = np.array([spec.J_c, spec.kappa, spec.Delta, spec.g_f, 0.0, 0.0])
    else:
        par = np.array([spec.J_c, spec.kappa, 0.0, 0.0, 0.0, 0.0])
    return g, dlt, kap, par


def _fill(t, spec, kernels, feedback):
    spec = validate_lattice(spec)
    M = spec.M
    F = np.asarray(kernels, dtype=complex).reshape(-1)
    if F.size == 1:
        F = np.full(M, F[0])
    g, dlt, kap, par = _arrays(spec, feedback)
    A = np.zeros((4 * M, 4 * M))
    _k.fill_lattice(float(t), F, g, dlt, kap, par, A)
    if feedback:
        # per-site gains; the compiled fill uses one gain pair, so patch rows here
        for m in range(M):
            a = 2 * M + 2 * m
            A[a, a] = SQ2 * spec.g_f * spec.beta_p[m] - spec.kappa
            A[a + 1, a] = -spec.Delta - SQ2 * spec.g_f * spec.beta_x[m]
    return A


def assemble_blocks(t, spec: LatticeSpec, kernels) -> np.ndarray:
    """Bare block matrix [[F(t), G(t)], [R(t), S]] (no drive detuning, no feedback)."""
    return _fill(t, spec, kernels, feedback=False)


def lattice_matrix(t, spec: LatticeSpec, kernels) -> np.ndarray:
    """Full generator including the cavity detuning and quadrature feedback."""
    return _fill(t, spec, kernels, feedback=True)


def split_blocks(A, M):
    """Quadrants (F, G, R, S) of a 4M x 4M lattice matrix."""
    h = 2 * M
    return A[:h, :h], A[:h, h:], A[h:, :h], A[h:, h:]


def feedback_lattice_rhs(state: LatticeState, kernels, spec: LatticeSpec, t: float = 0.0):
    return lattice_matrix(t, spec, kernels) @ state.X


def cavity_subspace(spec: LatticeSpec) -> np.ndarray:
    """Time-invariant cavity-only generator for two uncoupled-from-atom cavities."""
    spec = validate_lattice(spec)
    if spec.M != 2 or any(v != 0 for v in spec.g):
        raise PreconditionViolated("cavity_subspace needs M = 2 and g_1 = g_2 = 0")
    Ak = -spec.kappa * np.eye(2)
    AJ = np.array([[0.0, spec.J_c], [-spec.J_c, 0.0]])
    return np.block([[Ak, AJ], [AJ, Ak]])


# -- stable / unstable split ---------------------------------------------------------

@dataclass
class Decomposition:
    """Reordered system d/dt [X_u; X_s] = [[A_u, Q2(t)], [Q3(t), A_s + Q4(t)]] [X_u; X_s].

    X_u holds the cavity quadratures, X_s the atomic coherences. Q1 = 0.
    """

    spec: LatticeSpec
    A_u: np.ndarray
    A_s: np.ndarray
    steady: np.ndarray = field(repr=False)

    def _q(self, t, F=None):
        A = lattice_matrix(t, self.spec, self.steady if F is None else F)
        Fb, G, R, _ = split_blocks(A, self.spec.M)
        return Fb, G, R

    def Q2(self, t):
        return self._q(t)[2]

    def Q3(self, t):
        return self._q(t)[1]

    def Q4(self, t, F):
        return self._q(t, F)[0] - self.A_s

    def matrix(self, t, F=None) -> np.ndarray:
        Fb, G, R = self._q(t, F)
        return np.block([[self.A_u, R], [G, Fb]])


def stable_unstable_decomposition(spec: LatticeSpec, kernels_steady=None) -> Decomposition:
    spec = validate_lattice(spec)
    if kernels_steady is None:
        kernels_steady = steady_site_kernels(spec)
    Fb = np.asarray(kernels_steady, dtype=complex)
    if Fb.size != spec.M or not np.all(np.isfinite(Fb)):
        raise NoSteadyKernel("steady kernel values missing or non-finite")
    A = lattice_matrix(0.0, spec, Fb)
    _, _, _, S = split_blocks(A, spec.M)
    A_s = np.zeros((2 * spec.M, 2 * spec.M))
    for m in range(spec.M):
        K = spec.kappa_atom[m] * Fb[m]
        A_s[2 * m:2 * m + 2, 2 * m:2 * m + 2] = -np.array([[K.real, -K.imag], [K.imag, K.real]])
    return Decomposition(spec, S.copy(), A_s, Fb)


def diagonal_certificate(spec: LatticeSpec) -> np.ndarray:
    """Per-site cavity growth rate sqrt(2) g_f beta_p^m - kappa."""
    spec = validate_lattice(spec)
    return SQ2 * spec.g_f * np.array(spec.beta_p) - spec.kappa


def subspace_stability_report(spec: LatticeSpec, kernels_steady=None, h: float = 0.01,
                              tol: float = 1e-9) -> StabilityReport:
    """Certificates for the lattice split.

    * ``pi_plus``: integral of mu over one period of the reordered generator
      (the symmetrization is block diagonal because Q2 + Q3^T = 0).
    * ``lambda_u`` / ``lambda_s``: largest eigenvalue of the symmetrized 2x2
      site blocks [[c - kappa, -b/2], [-b/2, -kappa]] and -kappa_m^at R_m.
    * ``diagonal``: sqrt(2) g_f beta_p^m - kappa, decisive when beta_x = 0.
    * ``abscissa_u``: largest real part of the eigenvalues of A_u.

    Certificates are sufficient only, so a positive value yields
    "inconclusive". A subspace is called unstable only when it is exactly
    decoupled (all g = 0) and A_u has an eigenvalue with positive real part.
    """
    spec = validate_lattice(spec)
    dec = stable_unstable_decomposition(spec, kernels_steady)
    M = spec.M
    nz = [abs(d) for d in spec.delta if d != 0]
    period = 2 * math.pi / min(nz) if nz else 1.0
    n = max(int(math.ceil(period / h)), 2)
    ts = np.linspace(0.0, period, n + 1)
    mu = np.array([log_norm(dec.matrix(t)) for t in ts])
    pp = float(simpson(mu, x=ts))
    lam_u = []
    for m in range(M):
        c = SQ2 * spec.g_f * spec.beta_p[m]
        b = SQ2 * spec.g_f * spec.beta_x[m]
        blk = np.array([[c - spec.kappa, -b / 2], [-b / 2, -spec.kappa]])
        lam_u.append(float(np.linalg.eigvalsh(blk)[-1]))
    lam_s = [float(-spec.kappa_atom[m] * dec.steady[m].real) for m in range(M)]
    diag = diagonal_certificate(spec)
    absc = float(np.max(np.linalg.eigvals(dec.A_u).real))

    def sub_verdict(lam, exact_growth):
        if max(lam) < -tol:
            return "stable"
        if exact_growth:
            return "unstable"
        return "inconclusive"

    decoupled = all(v == 0 for v in spec.g)
    v_u = sub_verdict(lam_u, decoupled and absc > tol)
    v_s = sub_verdict(lam_s, False)
    mu_max = max(lam_u + lam_s)
    if pp < -tol and v_u == "stable" and v_s == "stable":
        verdict = "stable"
    elif v_u == "unstable":
        verdict = "unstable"
    else:
        verdict = "inconclusive"
    values = {"pi_plus": pp, "period": period, "mu": mu_max,
              "lambda_u": lam_u, "lambda_s": lam_s,
              "diagonal": diag.tolist(), "abscissa_u": absc,
              "verdict_u": v_u, "verdict_s": v_s,
              "shortcut": ("stable" if all(b == 0 for b in spec.beta_x) and np.all(diag < -tol)
                           else "inconclusive")}
    inputs = {k: getattr(spec, k) for k in spec.__dataclass_fields__}
    return StabilityReport("lattice_subspace", digest(inputs), values, verdict, tol,
                           margin=-mu_max)


# -- simulation -------------------------------------------------------------------------

def _names(M):
    names = []
    for m in range(1, M + 1):
        names += [f"s_re_{m}", f"s_im_{m}"]
    for m in range(1, M + 1):
        names += [f"a_re_{m}", f"a_im_{m}"]
    return names


def simulate_lattice(spec: LatticeSpec, state: Optional[LatticeState] = None, t_end: float = 20.0,
                     dt: float = 0.01, stride: int = 10) -> Trajectory:
    """RK4 over the 4M-dimensional system, co-integrating the M site kernels.

    Without ``state`` every site starts with a_m = 1 and s_m = 0.1; kernels
    start at zero unless the state carries values.
    """
    spec = validate_lattice(spec)
    M = spec.M
    if state is None:
        state = LatticeState.from_complex(np.full(M, 0.1), np.ones(M))
    if state.X.size != 4 * M:
        raise ConfigError(f"state has dimension {state.X.size}, expected {4 * M}")
    ps = site_params(spec)
    kk = np.array([p.kappa for p in ps], dtype=complex)
    Q = np.array([p.Q for p in ps], dtype=complex)
    S = np.array([p.S for p in ps], dtype=complex)
    F0 = np.zeros(M, complex) if state.F is None else np.asarray(state.F, complex).reshape(M)
    g, dlt, kap, par = _arrays(spec)
    bx, bp = np.array(spec.beta_x), np.array(spec.beta_p)
    if np.ptp(bx) == 0 and np.ptp(bp) == 0:
        par[4], par[5] = bx[0], bp[0]
        n_steps = int(round(t_end / dt))
        Xs, Fs, hit = _k.lattice_rk4(np.asarray(state.X, float), F0, kk, Q, S, g, dlt, kap, par,
                                     float(dt), n_steps, int(stride), BLOWUP)
    else:
        Xs, Fs, hit = _python_rk4(spec, state.X, F0, kk, Q, S, dt, int(round(t_end / dt)), stride)
    if hit >= 0:
        raise KernelDiverged(f"lattice state or kernel diverged at t={hit * dt:.6g} ns")
    t = np.arange(Xs.shape[0]) * dt * stride
    return Trajectory(t, _names(M), Xs, Fs, meta={"dt": dt, "stride": stride, "M": M})


def _python_rk4(spec, X0, F0, kk, Q, S, dt, n_steps, stride):
    """Fallback for heterogeneous per-site gains."""
    X, F = np.array(X0, float), F0.copy()
    out_X, out_F = [X.copy()], [F.copy()]
    f = lambda F: kk * F * F + Q * F + S
    for i in range(n_steps):
        t = i * dt
        kF1 = f(F)
        k1 = lattice_matrix(t, spec, F) @ X
        F2 = F + 0.5 * dt * kF1
        kF2 = f(F2)
        k2 = lattice_matrix(t + 0.5 * dt, spec, F2) @ (X + 0.5 * dt * k1)
        F3 = F + 0.5 * dt * kF2
        kF3 = f(F3)
        k3 = lattice_matrix(t + 0.5 * dt, spec, F3) @ (X + 0.5 * dt * k2)
        F4 = F + dt * kF3
        kF4 = f(F4)
        k4 = lattice_matrix(t + dt, spec, F4) @ (X + dt * k3)
        X = X + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        F = F + dt / 6 * (kF1 + 2 * kF2 + 2 * kF3 + kF4)
        if (i + 1) % stride == 0:
            out_X.append(X.copy())
            out_F.append(F.copy())
        if np.max(np.abs(F)) > BLOWUP or not np.all(np.isfinite(X)):
            return np.array(out_X), np.array(out_F), i + 1
    return np.array(out_X), np.array(out_F), -1


def block_norms(traj: Trajectory):
    """Euclidean norms of the cavity (a) and atomic (s) sub-vectors over time."""
    M = traj.meta["M"]
    return np.linalg.norm(traj.data[:, 2 * M:], axis=1), np.linalg.norm(traj.data[:, :2 * M], axis=1)


def fig6_spec(g_f: float = 1.0) -> LatticeSpec:
    """Two-cavity parameters used for the feedback-modulated stability example."""
    return LatticeSpec(M=2, J_c=0.1, g=(0.2, 0.4), delta=0.2, kappa_atom=0.04, kappa=1.0,
                       gamma=2.0, Omega=38.98, omega_a=43.98, chi=1.0, beta_x=0.0,
                       beta_p=0.2, g_f=g_f, Delta=5.0)
