"""Physical parameter bundles.

Units: every frequency and rate is a plain float in ns^-1 (the GHz value with no
2*pi factor), every time is in ns. MHz inputs are divided by 1000 by the caller.
"""
from __future__ import annotations

from dataclasses import dataclass, replace, fields
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, InconsistentDetuning, NegativeRate

DETUNING_TOL = 1e-9


def _arr(x) -> tuple:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class AtomSpec:
    """N-level ladder atom in a single cavity.

    ``level_energies`` has N entries with the ground level at 0. Per-transition
    quantities (``couplings``, ``env_couplings``, ``kernel_consts``,
    ``detunings``) have N-1 entries; index 0 is the 0<->1 transition.

    Detunings are either given explicitly or derived from ``cavity_freq``;
    when both are given they are cross-checked.
    """

    level_energies: Sequence[float]
    couplings: Sequence[float]
    env_couplings: Sequence[float]
    kernel_consts: Sequence[float]
    detunings: Optional[Sequence[float]] = None
    cavity_freq: Optional[float] = None

    def __post_init__(self):
        for f in ("level_energies", "couplings", "env_couplings", "kernel_consts"):
            object.__setattr__(self, f, _arr(getattr(self, f)))
        if self.detunings is not None:
            object.__setattr__(self, "detunings", _arr(self.detunings))
        if self.cavity_freq is not None:
            object.__setattr__(self, "cavity_freq", float(self.cavity_freq))

    @property
    def N(self) -> int:
        return len(self.level_energies)

    @property
    def n_transitions(self) -> int:
        return self.N - 1

    @property
    def transition_freqs(self) -> np.ndarray:
        return np.diff(np.asarray(self.level_energies))


@dataclass(frozen=True)
class CavitySpec:
    """Cavity mode. ``kappa`` is the Markovian photon loss rate (amplitude decays
    at kappa/2); ``kappa_c`` and ``chi_a`` describe an optional non-Markovian
    loss channel with its own memory kernel."""

    freq: Optional[float] = None
    kappa: float = 0.0
    kappa_c: float = 0.0
    chi_a: float = 1.0


@dataclass(frozen=True)
class EnvSpec:
    gamma: float
    Omega: float


@dataclass(frozen=True)
class DriveSpec:
    """Coherent drive in the frame rotating at ``drive_freq``.

    ``detuning`` is omega_c - omega_d. If it is omitted it is derived from
    ``cavity_freq`` and ``drive_freq``.
    """

    amplitude: float = 0.0
    detuning: Optional[float] = None
    drive_freq: Optional[float] = None
    cavity_freq: Optional[float] = None


@dataclass(frozen=True)
class FeedbackSpec:
    g_f: float = 0.0
    beta_x: float = 0.0
    beta_p: float = 0.0
    eta: float = 1.0


def _check_nonneg(problems, name, values):
    for i, v in enumerate(np.atleast_1d(values)):
        if not np.isfinite(v) or v < 0:
            problems.append((NegativeRate, f"{name}[{i}] = {v} must be finite and >= 0"))


def _raise(problems):
    if not problems:
        return
    cls = problems[0][0]
    msgs = [m for _, m in problems]
    raise cls("; ".join(msgs), problems=msgs)


def _validate_atom(a: AtomSpec) -> AtomSpec:
    problems = []
    if a.N < 2:
        raise ConfigError(f"atom needs at least 2 levels, got {a.N}")
    L = a.N - 1
    for name in ("couplings", "env_couplings", "kernel_consts"):
        if len(getattr(a, name)) != L:
            raise ConfigError(f"{name} must have N-1 = {L} entries, got {len(getattr(a, name))}")
    if a.level_energies[0] != 0.0:
        raise ConfigError("level_energies[0] must be 0 (ground-state reference)")
    _check_nonneg(problems, "env_couplings", a.env_couplings)
    _check_nonneg(problems, "kernel_consts", a.kernel_consts)
    det = a.detunings
    wt = a.transition_freqs
    if det is not None and len(det) != L:
        raise ConfigError(f"detunings must have {L} entries")
    if a.cavity_freq is not None:
        derived = wt - a.cavity_freq
        if det is None:
            det = tuple(float(d) for d in derived)
        else:
            for i, (d, e) in enumerate(zip(det, derived)):
                if abs(d - e) > DETUNING_TOL:
                    problems.append((InconsistentDetuning,
                                     f"detunings[{i}] = {d} but omega_tilde - omega_c = {e}"))
    elif det is None:
        det = (0.0,) * L
    _raise(problems)
    return replace(a, detunings=tuple(det))


def _validate_cavity(c: CavitySpec) -> CavitySpec:
    problems = []
    _check_nonneg(problems, "kappa", c.kappa)
    _check_nonneg(problems, "kappa_c", c.kappa_c)
    _check_nonneg(problems, "chi_a", c.chi_a)
    _raise(problems)
    return c


def _validate_env(e: EnvSpec) -> EnvSpec:
    if not (np.isfinite(e.gamma) and e.gamma > 0):
        raise NegativeRate(f"gamma = {e.gamma} must be > 0")
    return e


def _validate_drive(d: DriveSpec) -> DriveSpec:
    problems = []
    _check_nonneg(problems, "amplitude", d.amplitude)
    det = d.detuning
    if d.drive_freq is not None and d.cavity_freq is not None:
        derived = d.cavity_freq - d.drive_freq
        if det is None:
            det = derived
        elif abs(det - derived) > DETUNING_TOL:
            problems.append((InconsistentDetuning, f"drive detuning {det} != omega_c - omega_d = {derived}"))
    _raise(problems)
    return replace(d, detuning=0.0 if det is None else float(det))


def _validate_feedback(f: FeedbackSpec) -> FeedbackSpec:
    if not (0 < f.eta <= 1):
        raise NegativeRate(f"eta = {f.eta} must lie in (0, 1]")
    return f


_VALIDATORS = {
    AtomSpec: _validate_atom,
    CavitySpec: _validate_cavity,
    EnvSpec: _validate_env,
    DriveSpec: _validate_drive,
    FeedbackSpec: _validate_feedback,
}


def validate(spec):
    """Check invariants and fill derived fields. Idempotent.

    Raises a :class:`~nmq.errors.ConfigError` subclass whose ``problems``
    attribute lists every violation found.
    """
    try:
        fn = _VALIDATORS[type(spec)]
    except KeyError:
        raise TypeError(f"cannot validate {type(spec).__name__}") from None
    return fn(spec)


def as_dict(spec) -> dict:
    return {f.name: getattr(spec, f.name) for f in fields(spec)}
