"""Density-matrix reference solver on a truncated Fock space.

Dense matrices only. The tensor ordering is atoms first, then cavities, each
group site-major. Memory kernels are co-integrated with rho in the same RK4
step so comparisons with the mean-value modules see the same kernel values.

A dissipative channel with operator L, rate k and kernel value F contributes

    k [ (F + F*) L rho L^+ - F L^+L rho - F* rho L^+L ]

which is a Lindblad dissipator of rate k when F = 1/2.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .errors import (DimensionTooLarge, GridMismatch, TraceLost, ConfigError)
from .kernel import all_params, params_from
from .ltv import Trajectory
from .model import AtomSpec, CavitySpec, DriveSpec, EnvSpec, FeedbackSpec, validate

log = logging.getLogger("nmq.oracle")

MAX_DIM = 4096
TRACE_TOL = 1e-8
HERM_TOL = 1e-10
POS_TOL = 1e-6


@dataclass(frozen=True)
class HilbertConfig:
    N: int = 2
    n_ph: int = 1
    M: int = 1

    @property
    def dims(self):
        return [self.N] * self.M + [self.n_ph + 1] * self.M

    @property
    def d(self) -> int:
        return int(np.prod(self.dims))


@dataclass
class Operators:
    cfg: HilbertConfig
    a: list                  # a[m]
    lower: list              # lower[m][n-1] = |n-1><n| on atom m
    proj: list               # proj[m][n] = |n><n| on atom m
    eye: np.ndarray

    @property
    def num(self):
        return [am.conj().T @ am for am in self.a]

    @property
    def x(self):
        return [(am + am.conj().T) / np.sqrt(2.0) for am in self.a]

    @property
    def p(self):
        return [1j * (am.conj().T - am) / np.sqrt(2.0) for am in self.a]

    def L(self, kappas, m=0):
        """Collective lowering operator sum_n sqrt(kappa_n) |n-1><n| of atom m."""
        return sum(np.sqrt(k) * op for k, op in zip(kappas, self.lower[m]))


def _embed(op, k, dims):
    mats = [np.eye(d) for d in dims]
    mats[k] = op
    return reduce(np.kron, mats)


def destroy(n):
    return np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)


def build_operators(cfg: HilbertConfig) -> Operators:
    if cfg.d > MAX_DIM:
        raise DimensionTooLarge(f"Hilbert dimension {cfg.d} exceeds {MAX_DIM}")
    if cfg.N < 2 or cfg.n_ph < 1 or cfg.M < 1:
        raise ConfigError("need N >= 2, n_ph >= 1, M >= 1")
    dims = cfg.dims
    a = [_embed(destroy(cfg.n_ph + 1), cfg.M + m, dims) for m in range(cfg.M)]
    lower, proj = [], []
    for m in range(cfg.M):
        lo, pr = [], []
        for n in range(cfg.N):
            e = np.zeros((cfg.N, cfg.N), complex)
            e[n, n] = 1.0
            pr.append(_embed(e, m, dims))
            if n >= 1:
                e = np.zeros((cfg.N, cfg.N), complex)
                e[n - 1, n] = 1.0
                lo.append(_embed(e, m, dims))
        lower.append(lo)
        proj.append(pr)
    return Operators(cfg, a, lower, proj, np.eye(cfg.d, dtype=complex))


def basis_state(cfg: HilbertConfig, levels: Sequence[int], photons: Sequence[int]) -> np.ndarray:
    """Pure product state |levels> (x) |photons> as a density matrix."""
    kets = [np.eye(cfg.N)[l] for l in levels] + [np.eye(cfg.n_ph + 1)[k] for k in photons]
    psi = reduce(np.kron, kets).astype(complex)
    return np.outer(psi, psi.conj())


def pure(psi) -> np.ndarray:
    psi = np.asarray(psi, complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def expectations(rho, ops):
    """Tr(rho O) for each operator; rho may carry leading batch axes."""
    return np.array([np.einsum("...ij,ji->...", rho, O) for O in ops])


# -- model ------------------------------------------------------------------------

@dataclass
class Channel:
    op: np.ndarray
    rate: float
    kernel: Optional[int] = None     # index into the kernel list; None = Markovian

    def __post_init__(self):
        self.opd = self.op.conj().T
        self.LdL = self.opd @ self.op


@dataclass
class HTerm:
    """amp * exp(i freq t) * op + h.c. (``hermitian=True`` adds only the term)."""
    op: np.ndarray
    amp: complex
    freq: float = 0.0
    hermitian: bool = False


@dataclass
class Feedback:
    G: np.ndarray
    g_f: float
    meas: np.ndarray
    eta: float = 1.0


@dataclass
class MasterModel:
    ops: Operators
    hterms: list
    channels: list
    kernels: list = field(default_factory=list)   # KernelParams
    feedback: Optional[Feedback] = None
    observables: dict = field(default_factory=dict)

    def hamiltonian(self, t):
        H = np.zeros_like(self.ops.eye)
        for h in self.hterms:
            c = h.amp * np.exp(1j * h.freq * t)
            if h.hermitian:
                H = H + c * h.op
            else:
                X = c * h.op
                H = H + X + X.conj().T
        return H

    def kernel_rhs(self, F):
        return np.array([p.kappa * f * f + p.Q * f + p.S for p, f in zip(self.kernels, F)], complex)

    def rhs(self, t, rho, F):
        """Deterministic generator (master equation plus averaged feedback)."""
        H = self.hamiltonian(t)
        Hr = H @ rho
        out = -1j * (Hr - Hr.conj().swapaxes(-1, -2))
        for ch in self.channels:
            f = 0.5 if ch.kernel is None else F[ch.kernel]
            Lr = ch.op @ rho
            LdLr = ch.LdL @ rho
            out = out + ch.rate * (2.0 * f.real * (Lr @ ch.opd)
                                   - f * LdLr - np.conj(f) * LdLr.conj().swapaxes(-1, -2))
        fb = self.feedback
        if fb is not None and fb.g_f != 0.0:
            G = fb.G
            X = fb.meas @ rho
            X = X + X.conj().swapaxes(-1, -2)            # a rho + rho a^+
            out = out - 1j * fb.g_f * (G @ X - X @ G)
            C = G @ rho - rho @ G
            out = out - (fb.g_f ** 2 / (2.0 * fb.eta)) * (G @ C - C @ G)
        return out

    def superop(self, t, F):
        """Matrix of :meth:`rhs` acting on row-major vec(rho), using
        vec(A rho B) = (A kron B^T) vec(rho)."""
        d = self.ops.cfg.d
        I = np.eye(d)
        H = self.hamiltonian(t)
        S = -1j * (np.kron(H, I) - np.kron(I, H.T))
        for ch in self.channels:
            f = 0.5 if ch.kernel is None else F[ch.kernel]
            S = S + ch.rate * (2.0 * f.real * np.kron(ch.op, ch.op.conj())
                               - f * np.kron(ch.LdL, I) - np.conj(f) * np.kron(I, ch.LdL.T))
        fb = self.feedback
        if fb is not None and fb.g_f != 0.0:
            G, c = fb.G, fb.meas
            S = S - 1j * fb.g_f * (np.kron(G @ c, I) + np.kron(G, c.conj()) - np.kron(c, G.T)
                                   - np.kron(I, (c.conj().T @ G).T))
            G2 = G @ G
            S = S - (fb.g_f ** 2 / (2.0 * fb.eta)) * (np.kron(G2, I) - 2.0 * np.kron(G, G.T)
                                                      + np.kron(I, G2.T))
        return S

    def noise(self, rho):
        """Diffusion term of the homodyne SME (coefficient of dW)."""
        fb = self.feedback
        c = fb.meas
        X = c @ rho
        X = X + X.conj().swapaxes(-1, -2)
        tr = np.einsum("...ii->...", X).real
        out = np.sqrt(fb.eta) * (X - tr[..., None, None] * rho)
        if fb.g_f != 0.0:
            out = out - 1j * (fb.g_f / np.sqrt(fb.eta)) * (fb.G @ rho - rho @ fb.G)
        return out


# -- builders ------------------------------------------------------------------------

def single_cavity_model(atom: AtomSpec, env: EnvSpec, n_ph: int = 1,
                        cavity: Optional[CavitySpec] = None, drive: Optional[DriveSpec] = None,
                        cavity_detuning: float = 0.0) -> MasterModel:
    """N-level atom in one cavity, interaction picture.

    H = sum_n g_n (e^{-i Delta_n t} s-_n a^+ + h.c.) + cavity_detuning a^+a
        - i E (a - a^+).
    Atomic channels use the level kernels; the cavity has an optional Markovian
    loss ``kappa`` and a non-Markovian channel ``kappa_c`` with its own kernel.
    """
    atom = validate(atom)
    env = validate(env)
    cfg = HilbertConfig(atom.N, n_ph, 1)
    ops = build_operators(cfg)
    a = ops.a[0]
    hterms = []
    for n in range(atom.N - 1):
        # g e^{-i Delta t} s- a^+ + h.c.
        hterms.append(HTerm(ops.lower[0][n] @ a.conj().T, atom.couplings[n], -atom.detunings[n]))
    if cavity_detuning:
        hterms.append(HTerm(a.conj().T @ a, cavity_detuning, 0.0, hermitian=True))
    if drive is not None:
        drive = validate(drive)
        if drive.amplitude:
            hterms.append(HTerm(a, -1j * drive.amplitude))
    kernels = all_params(atom, env)
    channels = [Channel(ops.lower[0][n], atom.env_couplings[n], n) for n in range(atom.N - 1)]
    if cavity is not None:
        cavity = validate(cavity)
        if cavity.kappa:
            channels.append(Channel(a, cavity.kappa, None))
        if cavity.kappa_c:
            wc = cavity.freq if cavity.freq is not None else env.Omega
            kernels.append(params_from(env.gamma, env.Omega, wc, cavity.kappa_c, cavity.chi_a))
            channels.append(Channel(a, cavity.kappa_c, len(kernels) - 1))
    obs = {}
    for n in range(atom.N - 1):
        obs[f"pop_{n + 1}"] = ops.proj[0][n + 1]
        obs[f"coh_{n + 1}"] = ops.lower[0][n].conj().T @ a
        obs[f"s_{n + 1}"] = ops.lower[0][n]
    obs["photon"] = a.conj().T @ a
    obs["a"] = a
    obs["ground"] = ops.proj[0][0]
    return MasterModel(ops, hterms, channels, kernels, None, obs)


def lattice_model(spec, n_ph: int = 1) -> MasterModel:
    """Two-level atoms in an open chain of coupled cavities, interaction picture.

    H = sum_m g_m (e^{-i delta_m t} s-_m a_m^+ + h.c.) + Delta sum_m a_m^+ a_m
        + J sum_m (a_m^+ a_{m+1} + h.c.)
    Cavities lose amplitude at rate kappa (Lindblad rate 2 kappa); each atom
    decays through its own kernel. Observables s_m and a_m.
    """
    from .lattice import site_params, validate_lattice
    spec = validate_lattice(spec)
    M = spec.M
    ops = build_operators(HilbertConfig(2, n_ph, M))
    hterms, channels = [], []
    for m in range(M):
        a = ops.a[m]
        hterms.append(HTerm(ops.lower[m][0] @ a.conj().T, spec.g[m], -spec.delta[m]))
        if spec.Delta:
            hterms.append(HTerm(a.conj().T @ a, spec.Delta, 0.0, hermitian=True))
        if m + 1 < M and spec.J_c:
            hterms.append(HTerm(a.conj().T @ ops.a[m + 1], spec.J_c, 0.0))
        channels.append(Channel(ops.lower[m][0], spec.kappa_atom[m], m))
        if spec.kappa:
            channels.append(Channel(a, 2.0 * spec.kappa, None))
    obs = {}
    for m in range(M):
        obs[f"s_{m + 1}"] = ops.lower[m][0]
        obs[f"a_{m + 1}"] = ops.a[m]
        obs[f"photon_{m + 1}"] = ops.a[m].conj().T @ ops.a[m]
    return MasterModel(ops, hterms, channels, site_params(spec), None, obs)


def add_feedback(model: MasterModel, G: np.ndarray, fb: FeedbackSpec, meas=None) -> MasterModel:
    fb = validate(fb)
    model.feedback = Feedback(G, fb.g_f, model.ops.a[0] if meas is None else meas, fb.eta)
    return model


def sigma_x(ops: Operators, m: int = 0, n: int = 1):
    s = ops.lower[m][n - 1]
    return s + s.conj().T


def quadrature_G(ops: Operators, beta_x, beta_p, m: int = 0):
    return beta_x * ops.x[m] + beta_p * ops.p[m]


# -- integration -------------------------------------------------------------------------

def _rk4(model: MasterModel, t, rho, F, dt):
    kF1 = model.kernel_rhs(F)
    k1 = model.rhs(t, rho, F)
    F2 = F + 0.5 * dt * kF1
    kF2 = model.kernel_rhs(F2)
    k2 = model.rhs(t + 0.5 * dt, rho + 0.5 * dt * k1, F2)
    F3 = F + 0.5 * dt * kF2
    kF3 = model.kernel_rhs(F3)
    k3 = model.rhs(t + 0.5 * dt, rho + 0.5 * dt * k2, F3)
    F4 = F + dt * kF3
    kF4 = model.kernel_rhs(F4)
    k4 = model.rhs(t + dt, rho + dt * k3, F4)
    return (rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4),
            F + (dt / 6.0) * (kF1 + 2 * kF2 + 2 * kF3 + kF4))


def _observe(model, rho, names):
    row = []
    for nm in names:
        base, _, idx = nm.rpartition("_")
        head = nm.split("_")[0]
        if head in ("coh", "s", "a") and ("_re_" in nm or "_im_" in nm):
            v = np.trace(rho @ model.observables[head + "_" + idx])
            row.append(v.real if "_re_" in nm else v.imag)
        elif nm == "R_a":
            row.append(2.0 * np.trace(rho @ model.observables["a"]).real)
        elif nm == "I_a":
            row.append(-2.0 * np.trace(rho @ model.observables["a"]).imag)
        else:
            row.append(np.trace(rho @ model.observables[nm]).real)
    return row


def default_names(model: MasterModel, driven=False):
    L = sum(1 for k in model.observables if k.startswith("pop_"))
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


def evolve(model: MasterModel, rho0, t_end, dt=0.01, stride=10, names=None, F0=None,
           frozen=False) -> Trajectory:
    """RK4 integration of the master equation; records hygiene diagnostics.

    ``meta`` receives the worst trace drift, Hermiticity error and minimum
    eigenvalue seen at the output samples. Positivity violations beyond 1e-6
    are logged, not raised.
    """
    names = default_names(model) if names is None else names
    nk = len(model.kernels)
    F = np.zeros(nk, complex) if F0 is None else np.asarray(F0, complex).copy()
    if frozen:
        kr = model.kernel_rhs
        model.kernel_rhs = lambda F: np.zeros_like(F)
    rho = np.array(rho0, dtype=complex)
    n_steps = int(round(t_end / dt))
    ts, rows, Fs = [0.0], [_observe(model, rho, names)], [F.copy()]
    tr_err = herm_err = 0.0
    min_eig = np.inf
    try:
        for k in range(n_steps):
            rho, F = _rk4(model, k * dt, rho, F, dt)
            if (k + 1) % stride == 0:
                ts.append((k + 1) * dt)
                rows.append(_observe(model, rho, names))
                Fs.append(F.copy())
                tr_err = max(tr_err, abs(np.trace(rho) - 1.0))
                herm_err = max(herm_err, float(np.max(np.abs(rho - rho.conj().T))))
                min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]))
    finally:
        if frozen:
            model.kernel_rhs = kr
    if min_eig < -POS_TOL:
        log.warning("positivity violated: min eigenvalue %.3g", min_eig)
    meta = {"trace_drift": tr_err, "herm_err": herm_err, "min_eig": min_eig, "rho_final": rho}
    return Trajectory(np.asarray(ts), list(names), np.asarray(rows, float),
                      np.asarray(Fs)[:, :nk] if nk else None, meta)


def evolve_auto_cutoff(build, rho_builder, t_end, n_ph=5, edge_tol=1e-6, max_n_ph=40, **kw):
    """Run with increasing photon cutoff until the edge Fock level stays below ``edge_tol``.

    ``build(n_ph)`` returns a model, ``rho_builder(model)`` its initial state.
    """
    while True:
        model = build(n_ph)
        edge = np.zeros(n_ph + 1)
        edge[-1] = 1.0
        P = _embed(np.diag(edge).astype(complex), model.ops.cfg.M, model.ops.cfg.dims)
        model.observables["_edge"] = P
        names = kw.pop("names", None) or default_names(model, driven=True)
        tr = evolve(model, rho_builder(model), t_end, names=names + ["_edge"], **kw)
        edge_pop = float(np.max(np.abs(tr["_edge"])))
        if edge_pop < edge_tol or n_ph >= max_n_ph:
            tr.meta["n_ph"] = n_ph
            tr.meta["edge_pop"] = edge_pop
            keep = [i for i, nm in enumerate(tr.names) if nm != "_edge"]
            tr.data = tr.data[:, keep]
            tr.names = [tr.names[i] for i in keep]
            return tr
        kw["names"] = names
        n_ph = min(2 * n_ph, max_n_ph)


# -- stochastic master equation ----------------------------------------------------------------

def sme_step(model: MasterModel, rho, t, dt, dW, F, stats: Optional[dict] = None):
    """Euler-Maruyama step of the homodyne feedback SME (batched over axis 0).

    The trace is renormalized afterwards; a drift above 1e-6 in one step
    raises :class:`TraceLost`. ``stats`` collects the worst pre-renormalization
    trace drift and Hermiticity error.
    """
    dW = np.asarray(dW, float)
    new = rho + model.rhs(t, rho, F) * dt + model.noise(rho) * dW[..., None, None]
    tr = np.einsum("...ii->...", new)
    drift = np.abs(tr - 1.0)
    if np.any(drift > 1e-6):
        raise TraceLost(f"trace drifted to {tr.ravel()[np.argmax(drift)]} in one step")
    if stats is not None:
        herm = float(np.max(np.abs(new - new.conj().swapaxes(-1, -2))))
        stats["trace_drift"] = max(stats.get("trace_drift", 0.0), float(drift.max()))
        stats["herm_err"] = max(stats.get("herm_err", 0.0), herm)
    new = new / tr[..., None, None]
    return 0.5 * (new + new.conj().swapaxes(-1, -2))


def _rk4_propagator(model: MasterModel, t, dt, F0, Fh, F1):
    """One RK4 step of the linear master equation as a matrix on vec(rho)."""
    L1 = model.superop(t, F0)
    Lh = model.superop(t + 0.5 * dt, Fh)
    L4 = model.superop(t + dt, F1)
    I = np.eye(L1.shape[0])
    k2 = Lh @ (I + 0.5 * dt * L1)
    k3 = Lh @ (I + 0.5 * dt * k2)
    k4 = L4 @ (I + dt * k3)
    return I + (dt / 6.0) * (L1 + 2.0 * k2 + 2.0 * k3 + k4)


def sme_ensemble(model: MasterModel, rho0, t_end, dt, n_traj, seed, obs_names, stride=10,
                 batch=500, stats: Optional[dict] = None, drift: str = "rk4"):
    """Mean and standard error of observables over an SME ensemble.

    Trajectory i uses the i-th child stream of ``SeedSequence(seed)``. Kernels
    are deterministic and integrated once with RK4 on the half-step grid.

    ``drift="rk4"`` advances the deterministic part by one RK4 step of the
    master equation and adds the Euler-Maruyama noise increment; the ensemble
    mean then follows the RK4 master solution without the O(dt) Euler bias.
    ``drift="euler"`` is plain Euler-Maruyama (:func:`sme_step`).
    """
    from .kernel import integrate_batch
    from .numerics import Welford, spawn_streams
    if drift not in ("rk4", "euler"):
        raise ConfigError("drift must be 'rk4' or 'euler'")
    n_steps = int(round(t_end / dt))
    if model.kernels:
        _, Fgrid, _ = integrate_batch(model.kernels, n_steps * dt, dt / 2)
    else:
        Fgrid = np.zeros((2 * n_steps + 1, 0), complex)
    d = model.ops.cfg.d
    fb = model.feedback
    c, G = fb.meas, fb.G
    I = np.eye(d)
    Nlin = np.sqrt(fb.eta) * (np.kron(c, I) + np.kron(I, c.conj()))
    if fb.g_f != 0.0:
        Nlin = Nlin - 1j * (fb.g_f / np.sqrt(fb.eta)) * (np.kron(G, I) - np.kron(I, G.T))
    wc = c.T.reshape(-1)                   # tr(c rho) = vec(rho) . vec(c^T)
    props = None
    if drift == "rk4":
        props = [_rk4_propagator(model, k * dt, dt, Fgrid[2 * k], Fgrid[2 * k + 1],
                                 Fgrid[2 * k + 2]).T for k in range(n_steps)]
    gens = spawn_streams(seed, n_traj)
    obs = np.stack([model.observables[nm].T.reshape(-1) for nm in obs_names], axis=1)
    acc = Welford()
    diag = np.arange(d) * (d + 1)
    for b0 in range(0, n_traj, batch):
        gb = gens[b0:b0 + batch]
        nb = len(gb)
        dW = np.sqrt(dt) * np.stack([g.standard_normal(n_steps) for g in gb])
        if drift == "euler":
            rho = np.broadcast_to(np.asarray(rho0, complex), (nb, d, d)).copy()
            samples = [(rho.reshape(nb, -1) @ obs).real]
            for k in range(n_steps):
                rho = sme_step(model, rho, k * dt, dt, dW[:, k], Fgrid[2 * k], stats)
                if (k + 1) % stride == 0:
                    samples.append((rho.reshape(nb, -1) @ obs).real)
        else:
            v = np.broadcast_to(np.asarray(rho0, complex).reshape(-1), (nb, d * d)).copy()
            samples = [(v @ obs).real]
            for k in range(n_steps):
                tr_c = 2.0 * (v @ wc).real
                noise = v @ Nlin.T - (np.sqrt(fb.eta) * tr_c)[:, None] * v
                v = v @ props[k] + noise * dW[:, k, None]
                tr = v[:, diag].sum(axis=1)
                drift_err = np.abs(tr - 1.0)
                if np.any(drift_err > 1e-6):
                    raise TraceLost(f"trace drifted by {drift_err.max():.3g} in one step")
                m = v.reshape(nb, d, d)
                if stats is not None:
                    herm = float(np.max(np.abs(m - m.conj().swapaxes(-1, -2))))
                    stats["trace_drift"] = max(stats.get("trace_drift", 0.0), float(drift_err.max()))
                    stats["herm_err"] = max(stats.get("herm_err", 0.0), herm)
                m = m / tr[:, None, None]
                v = (0.5 * (m + m.conj().swapaxes(-1, -2))).reshape(nb, -1)
                if (k + 1) % stride == 0:
                    samples.append((v @ obs).real)
        arr = np.stack(samples, axis=1)           # (nb, n_out, n_obs)
        for row in arr:
            acc.push(row)
    t = np.arange(acc.mean.shape[0]) * dt * stride
    return t, acc.mean, acc.stderr


# -- comparison -------------------------------------------------------------------------------------

def compare_meanfield(oracle_traj: Trajectory, ltv_traj: Trajectory, observables=None, tol=1e-6):
    """Per-observable sup deviation and first time it exceeds ``tol``."""
    if oracle_traj.t.shape != ltv_traj.t.shape or np.max(np.abs(oracle_traj.t - ltv_traj.t)) > 1e-9:
        raise GridMismatch("trajectories are sampled on different time grids")
    names = observables or [n for n in oracle_traj.names if n in ltv_traj.names]
    out = {}
    for nm in names:
        dev = np.abs(oracle_traj[nm] - ltv_traj[nm])
        over = np.nonzero(dev > tol)[0]
        out[nm] = (float(dev.max()), float(oracle_traj.t[over[0]]) if over.size else None)
    return out
