"""Scenario configuration files.

Grammar: TOML. Top-level keys ``kind``, ``name`` and ``description``, followed
by sections. Every key is checked against the table below; unknown keys and
sections are errors. All rates and frequencies are plain numbers in ns^-1,
times in ns (no unit suffixes).

    kind = "single"            # kernel | single | driven | feedback | lattice
                               # | stability | oracle-check
    [env]       gamma, Omega
    [kernel]    kappa, chi, omega_tilde
    [atom]      level_energies, couplings, env_couplings, kernel_consts,
                detunings, cavity_freq
    [cavity]    freq, kappa, kappa_c, chi_a
    [drive]     amplitude, detuning, drive_freq, cavity_freq
    [feedback]  g_f, beta_x, beta_p, eta
    [lattice]   M, J_c, g, delta, kappa_atom, kappa, omega_a, beta_x, beta_p,
                g_f, Delta            (gamma, Omega, chi come from [env]/[kernel])
    [initial]   state entries, see INITIAL_KEYS
    [stepper]   dt, horizon, stride, scheme
    [mode]      kind = "deterministic" | "stochastic", n_traj, seed
    [run]       model, form, frozen, markov_compare, target, n_ph, tol, a_u,
                n_samples, margin
    [output]    dir, prefix
    [sweep]     "section.key" = [values...]   (cartesian product of variants)
"""
from __future__ import annotations

import itertools
import os
import re
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib as _toml
except ModuleNotFoundError:          # Python < 3.11
    import tomli as _toml

from .errors import ConfigError, MissingSection, ParseError, UnknownKey
from .lattice import LatticeSpec, validate_lattice
from .model import AtomSpec, CavitySpec, DriveSpec, EnvSpec, FeedbackSpec, validate
from .numerics import StepperConfig

KINDS = ("kernel", "single", "driven", "feedback", "lattice", "stability", "oracle-check")

INITIAL_KEYS = {"pop", "coh_re", "coh_im", "photon", "ground", "s_re", "s_im", "R_a", "I_a",
                "F_re", "F_im", "x", "p", "a_re", "a_im", "w", "V_x", "V_xp", "V_p"}

SECTIONS = {
    "env": {"gamma", "Omega"},
    "kernel": {"kappa", "chi", "omega_tilde"},
    "atom": {"level_energies", "couplings", "env_couplings", "kernel_consts", "detunings",
             "cavity_freq"},
    "cavity": {"freq", "kappa", "kappa_c", "chi_a"},
    "drive": {"amplitude", "detuning", "drive_freq", "cavity_freq"},
    "feedback": {"g_f", "beta_x", "beta_p", "eta"},
    "lattice": {"M", "J_c", "g", "delta", "kappa_atom", "kappa", "omega_a", "beta_x", "beta_p",
                "g_f", "Delta"},
    "initial": INITIAL_KEYS,
    "stepper": {"dt", "horizon", "stride", "scheme"},
    "mode": {"kind", "n_traj", "seed"},
    "run": {"model", "form", "frozen", "markov_compare", "target", "n_ph", "tol", "a_u",
            "n_samples", "margin"},
    "output": {"dir", "prefix"},
    "sweep": None,
}
TOP_KEYS = {"kind", "name", "description"}

REQUIRED = {
    "kernel": ("env", "kernel"),
    "single": ("env", "atom", "initial"),
    "driven": ("env", "atom", "drive", "initial"),
    "feedback": ("env", "atom", "cavity", "drive", "feedback", "initial"),
    "lattice": ("env", "lattice"),
    "stability": ("env",),
    "oracle-check": ("env", "atom", "initial"),
}
TARGET_SECTION = {"kernel": "kernel", "single": "atom", "lattice": "lattice"}


@dataclass
class ScenarioConfig:
    kind: str
    name: str
    sections: dict
    stepper: StepperConfig
    mode: str = "deterministic"
    n_traj: int = 1
    seed: int = 0
    out_dir: Optional[str] = None
    prefix: Optional[str] = None
    sweep: list = field(default_factory=list)
    description: str = ""

    def section(self, name) -> dict:
        return dict(self.sections.get(name, {}))

    @property
    def run(self) -> dict:
        return self.section("run")

    # -- spec builders ----------------------------------------------------------
    def env(self) -> EnvSpec:
        return validate(EnvSpec(**self.section("env")))

    def atom(self) -> AtomSpec:
        return validate(AtomSpec(**self.section("atom")))

    def cavity(self) -> CavitySpec:
        return validate(CavitySpec(**self.section("cavity")))

    def drive(self) -> DriveSpec:
        return validate(DriveSpec(**self.section("drive")))

    def feedback(self) -> FeedbackSpec:
        return validate(FeedbackSpec(**self.section("feedback")))

    def kernel_params(self):
        from .kernel import params_from
        env = self.env()
        k = self.section("kernel")
        return params_from(env.gamma, env.Omega, float(k.get("omega_tilde", env.Omega)),
                           float(k["kappa"]), float(k.get("chi", 1.0)))

    def lattice(self) -> LatticeSpec:
        lat = self.section("lattice")
        env = self.env()
        chi = float(self.section("kernel").get("chi", 1.0))
        return validate_lattice(LatticeSpec(gamma=env.gamma, Omega=env.Omega, chi=chi, **lat))

    def variants(self):
        """(label, config) pairs, one per point of the sweep grid."""
        if not self.sweep:
            yield "", self
            return
        keys = [k for k, _ in self.sweep]
        for combo in itertools.product(*[v for _, v in self.sweep]):
            secs = {k: dict(v) for k, v in self.sections.items()}
            parts = []
            for key, val in zip(keys, combo):
                sec, sub = key.split(".", 1)
                secs.setdefault(sec, {})[sub] = val
                parts.append(f"{sub}={_label(val)}")
            yield "_".join(parts), ScenarioConfig(self.kind, self.name, secs, self.stepper,
                                                  self.mode, self.n_traj, self.seed, self.out_dir,
                                                  self.prefix, [], self.description)


def _label(v):
    if isinstance(v, list):
        return "-".join(_label(x) for x in v)
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


_POS = re.compile(r"line (\d+), column (\d+)")


def _load(text: str) -> dict:
    try:
        return _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        if line is None:
            m = _POS.search(str(exc))
            line, col = (int(m.group(1)), int(m.group(2))) if m else (0, 0)
        err = ParseError(f"line {line}, column {col}: {exc}")
        err.line, err.column = line, col
        raise err from None


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a scenario; every problem found is collected."""
    raw = _load(text)
    unknown = []
    for k, v in raw.items():
        if isinstance(v, dict):
            if k not in SECTIONS:
                unknown.append(f"[{k}]")
                continue
            allowed = SECTIONS[k]
            if allowed is not None:
                unknown += [f"{k}.{sub}" for sub in v if sub not in allowed]
        elif k not in TOP_KEYS:
            unknown.append(k)
    sweep = []
    for key, vals in raw.get("sweep", {}).items():
        sec, _, sub = key.partition(".")
        if sec not in SECTIONS or SECTIONS[sec] is None or sub not in SECTIONS[sec]:
            unknown.append(f"sweep.{key}")
        elif not isinstance(vals, list) or not vals:
            raise ConfigError(f"sweep.{key} must be a non-empty list")
        else:
            sweep.append((key, vals))
    if unknown:
        raise UnknownKey("unknown keys: " + ", ".join(unknown), unknown)
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    need = list(REQUIRED[kind])
    run = raw.get("run", {})
    if kind == "stability":
        target = run.get("target", "kernel")
        if target not in TARGET_SECTION:
            raise ConfigError(f"run.target must be one of {tuple(TARGET_SECTION)}")
        need.append(TARGET_SECTION[target])
    missing = [s for s in need if s not in raw]
    if missing:
        raise MissingSection("missing sections: " + ", ".join(missing), missing)
    st = raw.get("stepper", {})
    stepper = StepperConfig(float(st.get("dt", 0.01)), float(st.get("horizon", 10.0)),
                            int(st.get("stride", 10)), st.get("scheme", "RK4"))
    mode = raw.get("mode", {})
    out = raw.get("output", {})
    sections = {k: v for k, v in raw.items() if isinstance(v, dict) and k != "sweep"}
    cfg = ScenarioConfig(kind, raw.get("name", kind), sections, stepper,
                         mode.get("kind", "deterministic"), int(mode.get("n_traj", 1)),
                         int(mode.get("seed", 0)), out.get("dir"), out.get("prefix"), sweep,
                         raw.get("description", ""))
    if cfg.mode not in ("deterministic", "stochastic"):
        raise ConfigError(f"mode.kind must be deterministic or stochastic, got {cfg.mode!r}")
    for _, v in cfg.variants():
        _cross_validate(v)
    return cfg


def _cross_validate(cfg: ScenarioConfig):
    try:
        secs = cfg.sections
        if "env" in secs:
            cfg.env()
        if "atom" in secs:
            cfg.atom()
        if "cavity" in secs:
            cfg.cavity()
        if "drive" in secs:
            cfg.drive()
        if "feedback" in secs:
            cfg.feedback()
        if "lattice" in secs:
            cfg.lattice()
        if "kernel" in secs and cfg.kind != "lattice":
            cfg.kernel_params()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    except KeyError as exc:
        raise MissingSection(f"missing key {exc}") from None


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 ({exc})") from None
    return parse_config(text)


def scenario_dir() -> str:
    return os.path.join(os.path.dirname(__file__), "scenarios")


def bundled(name: str) -> ScenarioConfig:
    path = os.path.join(scenario_dir(), f"{name}.toml")
    if not os.path.exists(path):
        raise ConfigError(f"no bundled scenario {name!r}")
    return load_config(path)
