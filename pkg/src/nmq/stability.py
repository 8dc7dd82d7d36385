"""Stability certificates for the mean-value systems and the memory kernels.

All logarithmic norms are taken in the Euclidean norm, so that
mu[A] = lambda_max((A + A^T) / 2). Every certificate here is a sufficient
condition: a failed inequality yields the verdict "inconclusive", never
"unstable", unless a direct computation exhibits growth.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .errors import DivergentTail, EmptySet, PreconditionViolated
from .kernel import (KernelParams, KernelState, RegimeTag, integrate_batch,
                     kernel_rhs, steady_value, decay_rate)

VERDICTS = ("stable", "unstable", "inconclusive")


@dataclass
class StabilityReport:
    criterion: str
    inputs_digest: str
    values: dict
    verdict: str
    tolerance: float
    margin: float = float("nan")
    seed: int | None = None

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_jsonable)

    def to_text(self) -> str:
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.values.items())
        return (f"{self.criterion}: {self.verdict} (margin {self.margin:.6g}, "
                f"tol {self.tolerance:g}) [{vals}] digest={self.inputs_digest}")


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, complex):
        return [v.real, v.imag]
    return str(v)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def digest(inputs) -> str:
    """Short hash identifying the inputs of a certificate."""
    blob = json.dumps(inputs, sort_keys=True, default=_jsonable).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def verdict_below(value: float, tolerance: float) -> str:
    """'stable' when value < -tolerance, otherwise 'inconclusive'."""
    return "stable" if value < -tolerance else "inconclusive"


# -- logarithmic norm and its integral -------------------------------------------

def log_norm(A) -> float:
    """Euclidean logarithmic norm, the largest eigenvalue of (A + A^T)/2."""
    A = np.asarray(A, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[-1])


def _grid(t0, T, h):
    n = int(round(T / h))
    if n < 1 or abs(n * h - T) > 1e-9 * max(1.0, abs(T)):
        raise PreconditionViolated(f"step {h} does not divide interval {T}")
    return t0 + h * np.arange(n + 1)


def pi_plus(A: Callable[[float], np.ndarray], t0: float, T: float, h: float) -> float:
    """Composite Simpson integral of mu[A(tau)] over [t0, t0 + T]."""
    ts = _grid(t0, T, h)
    mu = np.array([log_norm(A(t)) for t in ts])
    return float(simpson(mu, x=ts))


def decay_integral(Atilde: Callable[[float], np.ndarray], horizon: float, dt: float = 0.01,
                   rate: float | None = None, params: list[KernelParams] | None = None):
    """Integral of the Frobenius norm of a decaying perturbation plus a tail bound.

    The tail beyond ``horizon`` is bounded by ||A~(H)|| / r with r the slowest
    linearized kernel decay rate (taken from ``params``), an explicit ``rate``,
    or, failing both, the late-time log slope of the samples.

    Returns (integral, integral + tail).
    """
    if params is not None:
        rates = []
        for p in params:
            if steady_value(p) is None:
                raise DivergentTail(f"kernel {p} has no steady value")
            rates.append(decay_rate(p))
        rate = min(rates) if rate is None else min(rate, min(rates))
    ts = _grid(0.0, horizon, dt)
    nrm = np.array([np.linalg.norm(Atilde(t)) for t in ts])
    if not np.all(np.isfinite(nrm)):
        raise DivergentTail("non-finite perturbation norm")
    head = float(simpson(nrm, x=ts))
    last = nrm[-1]
    if last <= 1e-14 * max(1.0, nrm.max()):
        return head, head
    if rate is None:
        k = max(len(ts) // 10, 2)
        y = np.log(np.maximum(nrm[-k:], 1e-300))
        rate = -np.polyfit(ts[-k:], y, 1)[0]
    if not rate > 0:
        raise DivergentTail("perturbation does not decay")
    return head, head + last / rate


# -- transition matrices -------------------------------------------------------

def transition_matrix(A: Callable[[float], np.ndarray], t0: float, t: float,
                      dt: float = 0.01) -> np.ndarray:
    """Phi(t, t0) from dPhi/dt = A(t) Phi by RK4 (step shrunk to divide t - t0)."""
    if t < t0:
        raise PreconditionViolated("transition_matrix needs t >= t0")
    d = np.asarray(A(t0)).shape[0]
    Phi = np.eye(d)
    if t == t0:
        return Phi
    n = max(int(math.ceil((t - t0) / dt - 1e-9)), 1)
    h = (t - t0) / n
    s = t0
    for _ in range(n):
        k1 = A(s) @ Phi
        Am = A(s + 0.5 * h)
        k2 = Am @ (Phi + 0.5 * h * k1)
        k3 = Am @ (Phi + 0.5 * h * k2)
        k4 = A(s + h) @ (Phi + h * k3)
        Phi = Phi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        s = t0 + h * (_ + 1)
    return Phi


def transition_norms(A: Callable[[float], np.ndarray], t0: float, t_end: float,
                     dt: float = 0.01, stride: int = 10):
    """Spectral norms of Phi(t, t0) sampled on a grid, for ues_fit."""
    d = np.asarray(A(t0)).shape[0]
    n = int(round((t_end - t0) / dt))
    Phi = np.eye(d)
    ts, ns = [t0], [1.0]
    for i in range(n):
        s = t0 + i * dt
        k1 = A(s) @ Phi
        Am = A(s + 0.5 * dt)
        k2 = Am @ (Phi + 0.5 * dt * k1)
        k3 = Am @ (Phi + 0.5 * dt * k2)
        k4 = A(s + dt) @ (Phi + dt * k3)
        Phi = Phi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (i + 1) % stride == 0:
            ts.append(t0 + (i + 1) * dt)
            ns.append(np.linalg.norm(Phi, 2))
    return np.array(ts), np.array(ns)


@dataclass(frozen=True)
class UESFit:
    K: float
    alpha: float
    fitted: bool

    def bound(self, t, tau=0.0):
        return self.K * np.exp(-self.alpha * (np.asarray(t) - tau))


def ues_fit(t, norms, tau: float = 0.0) -> UESFit:
    """Least-squares exponential envelope ||Phi(t, tau)|| <= K exp(-alpha (t - tau)).

    The slope comes from a linear fit of log||Phi||; K is then the smallest
    constant making the envelope hold at every sample. ``fitted`` is False
    (Unfit) when the fitted trend is non-decreasing.
    """
    t = np.asarray(t, dtype=float)
    y = np.log(np.maximum(np.asarray(norms, dtype=float), 1e-300))
    if t.size < 10:
        raise PreconditionViolated("ues_fit needs at least 10 samples")
    slope = np.polyfit(t - tau, y, 1)[0]
    alpha = -float(slope)
    if not alpha > 0:
        return UESFit(float("nan"), alpha, False)
    K = float(np.exp(np.max(y + alpha * (t - tau))))
    return UESFit(K, alpha, True)


# -- kernel ODE: Jacobian and Lyapunov function -------------------------------

def kernel_jacobian(state: KernelState, params: KernelParams) -> np.ndarray:
    """Stability matrix of the kernel ODE in the (R, I) plane, as used for the
    contraction argument: [[kR - g, -kI + u], [kI - u, kR - g]]."""
    k, g, u = params.kappa, params.gamma, params.u
    R, I = state.R, state.I
    return np.array([[k * R - g, -k * I + u], [k * I - u, k * R - g]])


def _exact_jacobian(R, I, p: KernelParams):
    k, g, u = p.kappa, p.gamma, p.u
    return np.array([[2 * k * R - g, -2 * k * I + u], [2 * k * I - u, 2 * k * R - g]])


def lyapunov_rate(state: KernelState, params: KernelParams):
    """V = ||f(X_F)||^2 and dV/dt = 2 f^T (df/dX) f along the flow.

    The antisymmetric (detuning) part of df/dX drops out, so
    dV/dt = 2 (2 kappa R - gamma) V.
    """
    f = kernel_rhs(state, params)
    J = _exact_jacobian(state.R, state.I, params)
    V = float(f @ f)
    return V, float(2.0 * f @ J @ f)


def _V(F, p: KernelParams):
    return np.abs(p.kappa * F * F + p.Q * F + p.S) ** 2


def invariant_set_bound(params: KernelParams) -> float:
    """Largest level alpha_V = gamma (gamma - chi kappa) / kappa^2 of the
    Lyapunov function for which the sublevel set is certified invariant."""
    k, g, c = params.kappa, params.gamma, params.chi
    if c * k >= g:
        raise EmptySet(f"chi*kappa = {c * k:g} >= gamma = {g:g}")
    if k == 0:
        return float("inf")
    return g * (g - c * k) / k ** 2


@dataclass
class ProbeResult:
    alpha: float
    n_samples: int
    exits: int
    max_V: float
    seed: int
    starts: np.ndarray = field(repr=False, default=None)

    @property
    def exit_fraction(self) -> float:
        return self.exits / self.n_samples


def sample_sublevel(params: KernelParams, alpha: float, n: int, rng: np.random.Generator,
                    half_plane: bool = True) -> np.ndarray:
    """Uniform rejection samples of {V <= alpha}, optionally cut to R <= gamma/(2 kappa).

    The half-plane is where 2 kappa R - gamma <= 0, hence dV/dt <= 0.
    """
    k = params.kappa
    # bounding box: |kF^2 + QF + S| <= sqrt(alpha) keeps |F| below this radius
    r = (abs(params.Q) + math.sqrt(abs(params.Q) ** 2 + 4 * k * (abs(params.S) + math.sqrt(alpha)))) / (2 * k)
    out = []
    while len(out) < n:
        z = rng.uniform(-r, r, size=4 * n) + 1j * rng.uniform(-r, r, size=4 * n)
        ok = _V(z, params) <= alpha
        if half_plane:
            ok &= z.real <= params.gamma / (2 * k)
        out.extend(z[ok].tolist())
    return np.array(out[:n], dtype=np.complex128)


def invariant_set_probe(params: KernelParams, alpha: float | None = None, n_samples: int = 100,
                        t_end: float = 50.0, dt: float = 0.01, seed: int = 0,
                        half_plane: bool = True, tol: float = 1e-9) -> ProbeResult:
    """Monte-Carlo forward-invariance check of {V <= alpha}.

    Counts sampled starts whose trajectory ever leaves the level set (with a
    relative slack ``tol``) or hits the blow-up cap.
    """
    if alpha is None:
        alpha = invariant_set_bound(params)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    F0 = sample_sublevel(params, alpha, n_samples, rng, half_plane)
    _, F, hit = integrate_batch([params] * n_samples, t_end, dt, F0)
    V = _V(F, params)
    out = (V.max(axis=0) > alpha * (1 + tol)) | (hit >= 0)
    return ProbeResult(alpha, n_samples, int(out.sum()), float(V.max()), seed, F0)


# -- BIBO probe ----------------------------------------------------------------------

def bibo_probe(params: KernelParams, a_u: float, n_samples: int = 100, t_end: float = 50.0,
               dt: float = 0.01, seed: int = 0, starts: str = "invariant",
               drift_tol: float = 1e-6) -> StabilityReport:
    """Bounded-detuning probe of the kernel ODE.

    Detunings are drawn uniformly in [-a_u, a_u] and initial values either from
    the certified invariant set of the resonant kernel or at F = 0. The verdict
    is "stable" when all trajectories stay finite and their late-time drift is
    below ``drift_tol`` or still shrinking; the bound beta_X is reported.
    """
    base = params.resonant()
    inputs = dict(params=asdict(params), a_u=a_u, n=n_samples, t_end=t_end, dt=dt, starts=starts)
    dg = digest(inputs)
    if base.regime is RegimeTag.SuperCritical or steady_value(base) is None:
        return StabilityReport("bibo", dg, {"reason": "resonant kernel has no stable fixed point"},
                               "inconclusive", drift_tol, seed=seed)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    us = rng.uniform(-a_u, a_u, size=n_samples) if a_u > 0 else np.zeros(n_samples)
    if starts == "zero":
        F0 = np.zeros(n_samples, dtype=np.complex128)
    else:
        try:
            alpha = invariant_set_bound(base)
        except EmptySet:
            alpha = abs(base.S) ** 2
        F0 = sample_sublevel(base, alpha, n_samples, rng)
    ps = [KernelParams(params.kappa, params.gamma, params.chi, float(u)) for u in us]
    t, F, hit = integrate_batch(ps, t_end, dt, F0)
    if np.any(hit >= 0) or not np.all(np.isfinite(F)):
        return StabilityReport("bibo", dg, {"diverged": int(np.sum(hit >= 0))}, "inconclusive",
                               drift_tol, seed=seed)
    beta = float(np.abs(F).max())
    h = t[1] - t[0]
    late = float(np.abs(F[-1] - F[-2]).max() / h)
    mid = len(t) // 2
    mid_drift = float(np.abs(F[mid] - F[mid - 1]).max() / h)
    steady = np.array([steady_value(p) for p in ps], dtype=np.complex128)
    gap = float(np.abs(F[-1] - steady).max())
    values = {"beta_X": beta, "late_drift": late, "mid_drift": mid_drift, "steady_gap": gap,
              "steady_abs_max": float(np.abs(steady).max()), "n_samples": n_samples}
    # settled, or still settling (critical kernels approach algebraically)
    verdict = "stable" if (late < drift_tol or late < mid_drift) else "inconclusive"
    return StabilityReport("bibo", dg, values, verdict, drift_tol, margin=drift_tol - late, seed=seed)


# -- combined certificate for an LTV system -------------------------------------

def corollary_report(Abar: Callable[[float], np.ndarray], Atilde: Callable[[float], np.ndarray],
                     period: float, h: float, horizon: float, params=None, margin: float = 0.05,
                     inputs=None) -> StabilityReport:
    """Periodic part certified by Pi+ < -margin over one period, perturbation by a
    finite decay integral. Both hold => verdict "stable"."""
    pp = pi_plus(Abar, 0.0, period, h)
    try:
        head, total = decay_integral(Atilde, horizon, h, params=params)
        finite = True
    except DivergentTail:
        head, total, finite = float("nan"), float("inf"), False
    values = {"pi_plus": pp, "decay_integral": head, "decay_bound": total,
              "period": period}
    verdict = "stable" if (pp < -margin and finite) else "inconclusive"
    return StabilityReport("corollary", digest(inputs or values), values, verdict, margin,
                           margin=-pp - margin)
