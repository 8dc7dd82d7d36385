"""Command-line entry point ``nmq``.

    nmq <kind> --config PATH [--seed N] [--out DIR]
    nmq reproduce fig2|fig3|fig4|fig5|fig6 [--out DIR]
    nmq oracle-check single-excitation [--out DIR]

Outputs go to --out, else the config's [output] dir, else $NMQ_OUT, else ./out.
Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 divergence.
"""
from __future__ import annotations

import argparse
import glob
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from .config import KINDS, ScenarioConfig, bundled, load_config, scenario_dir
from .errors import ConfigError, NMQError, NumericalError

log = logging.getLogger("nmq.cli")

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6")


# -- CSV ---------------------------------------------------------------------------

def emit_csv(traj, path) -> str:
    """Write ``t,<names...>`` then one row per sample, 17 significant digits."""
    if hasattr(traj, "columns"):
        names, data = traj.columns()
    else:                                       # EnsembleResult
        names = list(traj.names) + [f"{n}_stderr" for n in traj.names]
        data = np.hstack([traj.mean, traj.stderr]) if len(traj.t) else np.empty((0, 2 * len(traj.names)))
    t = np.asarray(traj.t, dtype=float)
    data = np.asarray(data, dtype=float).reshape(len(t), len(names))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(["t"] + list(names)) + "\n")
        if len(t):
            np.savetxt(fh, np.column_stack([t, data]), fmt="%.17g", delimiter=",")
    return path


def read_csv(path):
    """Inverse of emit_csv: (names, t, data)."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        if not fh.readline():
            return header[1:], np.empty(0), np.empty((0, len(header) - 1))
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header[1:], arr[:, 0], arr[:, 1:]


# -- initial states -----------------------------------------------------------------

def _c(sec, re, im, default=0.0):
    r = np.atleast_1d(np.asarray(sec.get(re, default), dtype=float))
    i = np.atleast_1d(np.asarray(sec.get(im, 0.0), dtype=float))
    return r + 1j * i


def _single_state(cfg: ScenarioConfig, driven=False):
    from .ltv import DrivenState, SingleCavityState
    ini = cfg.section("initial")
    atom = cfg.atom()
    L = atom.N - 1
    pop = np.resize(np.asarray(ini.get("pop", [0.0] * L), float), L)
    coh = np.resize(_c(ini, "coh_re", "coh_im"), L)
    ground = ini.get("ground")
    if driven:
        s = np.resize(_c(ini, "s_re", "s_im"), L)
        return DrivenState(pop, coh, float(ini.get("photon", 0.0)), ground, s,
                           float(ini.get("R_a", 0.0)), float(ini.get("I_a", 0.0)))
    return SingleCavityState(pop, coh, float(ini.get("photon", 0.0)), ground)


def _kernel_F0(cfg, n):
    ini = cfg.section("initial")
    if "F_re" not in ini and "F_im" not in ini:
        return None
    return np.resize(_c(ini, "F_re", "F_im"), n)


# -- runners ------------------------------------------------------------------------

class Runner:
    def __init__(self, out_dir: str, stream=sys.stdout):
        self.out_dir = out_dir
        self.stream = stream
        self.artifacts: list[str] = []

    def _path(self, cfg, label, suffix="", ext="csv"):
        base = cfg.prefix or cfg.name
        parts = [base] + [p for p in (label, suffix) if p]
        return os.path.join(self.out_dir, "_".join(parts) + "." + ext)

    def csv(self, traj, cfg, label, suffix=""):
        p = emit_csv(traj, self._path(cfg, label, suffix))
        self.artifacts.append(p)
        print(f"wrote {p}", file=self.stream)

    def report(self, reports, cfg, label):
        txt = self._path(cfg, label, "report", "txt")
        os.makedirs(self.out_dir, exist_ok=True)
        with open(txt, "w") as fh:
            for r in reports:
                fh.write(r.to_text() + "\n")
                print(r.to_text(), file=self.stream)
        with open(self._path(cfg, label, "report", "jsonl"), "w") as fh:
            for r in reports:
                fh.write(r.to_json() + "\n")
        self.artifacts.append(txt)

    def run(self, cfg: ScenarioConfig):
        fn = getattr(self, "run_" + cfg.kind.replace("-", "_"))
        for label, v in cfg.variants():
            fn(v, label)
        return self.artifacts

    # each kind --------------------------------------------------------------------
    def run_kernel(self, cfg, label):
        from .kernel import integrate_kernel
        from .ltv import Trajectory
        p = cfg.kernel_params()
        F0 = _kernel_F0(cfg, 1)
        st = cfg.stepper
        t, F = integrate_kernel(p, st.horizon, st.dt, 0.0 if F0 is None else F0[0], st.stride)
        traj = Trajectory(t, [], np.empty((len(t), 0)), F[:, None],
                          meta={"regime": p.regime.value})
        self.csv(traj, cfg, label)

    def run_single(self, cfg, label):
        from .ltv import simulate_single
        st = cfg.stepper
        atom, env = cfg.atom(), cfg.env()
        cav = cfg.cavity() if "cavity" in cfg.sections else None
        form = cfg.run.get("form", "complex")
        kw = dict(dt=st.dt, stride=st.stride, cavity=cav, form=form,
                  F0=_kernel_F0(cfg, atom.N - 1))
        state = _single_state(cfg)
        traj = simulate_single(atom, env, state, st.horizon, frozen=bool(cfg.run.get("frozen", False)), **kw)
        self.csv(traj, cfg, label)
        if cfg.run.get("markov_compare", False):
            kw["F0"] = None
            mk = simulate_single(atom, env, state, st.horizon, frozen=True, **kw)
            self.csv(mk, cfg, label, "markov")
            i0 = np.searchsorted(traj.t, 0.5 * st.horizon)
            dev = float(np.max(np.abs(traj.data[i0:] - mk.data[i0:])))
            print(f"late-time |non-Markovian - Markovian| = {dev:.3e}", file=self.stream)

    def run_driven(self, cfg, label):
        from .ltv import simulate_driven
        st = cfg.stepper
        atom = cfg.atom()
        cav = cfg.cavity() if "cavity" in cfg.sections else None
        traj = simulate_driven(atom, cfg.env(), cfg.drive(), _single_state(cfg, True), st.horizon,
                               st.dt, st.stride, cavity=cav, F0=_kernel_F0(cfg, atom.N - 1))
        self.csv(traj, cfg, label)

    def run_feedback(self, cfg, label):
        from .feedback import (GaussianMoments, QuadratureState, SemiclassicalTwoLevel,
                               simulate_feedback)
        st = cfg.stepper
        ini = cfg.section("initial")
        model = cfg.run.get("model", "cavity")
        atom = cfg.atom()
        moments = None
        if model == "atomic":
            a = _c(ini, "a_re", "a_im")[0]
            s = _c(ini, "s_re", "s_im")[0]
            initial = SemiclassicalTwoLevel(a, s, float(ini.get("w", 1.0)))
        else:
            s = np.resize(_c(ini, "s_re", "s_im"), atom.N - 1)
            if "a_re" in ini or "a_im" in ini:
                initial = QuadratureState.from_a(_c(ini, "a_re", "a_im")[0], s)
            else:
                x, p = float(ini.get("x", 0.0)), float(ini.get("p", 0.0))
                initial = QuadratureState(x, p, s, (x + 1j * p) / np.sqrt(2.0))
            moments = GaussianMoments(float(ini.get("V_x", 0.5)), float(ini.get("V_xp", 0.0)),
                                      float(ini.get("V_p", 0.5)))
        res = simulate_feedback(model, atom, cfg.env(), cfg.cavity(), cfg.drive(), cfg.feedback(),
                                initial, st.horizon, st.dt, st.stride, moments=moments,
                                mode=cfg.mode, n_traj=cfg.n_traj, seed=cfg.seed)
        self.csv(res, cfg, label)

    def run_lattice(self, cfg, label):
        from .lattice import LatticeState, simulate_lattice, subspace_stability_report, block_norms
        spec = cfg.lattice()
        ini = cfg.section("initial")
        M = spec.M
        state = None
        if ini:
            state = LatticeState.from_complex(np.resize(_c(ini, "s_re", "s_im"), M),
                                              np.resize(_c(ini, "a_re", "a_im"), M),
                                              _kernel_F0(cfg, M))
        st = cfg.stepper
        traj = simulate_lattice(spec, state, st.horizon, st.dt, st.stride)
        self.csv(traj, cfg, label)
        rep = subspace_stability_report(spec)
        a, _ = block_norms(traj)
        rep.values["sim_ratio_end"] = float(a[-1] / a[0]) if a[0] else float("nan")
        rep.values["sim_ratio_max"] = float(a.max() / a[0]) if a[0] else float("nan")
        self.report([rep], cfg, label)

    def run_stability(self, cfg, label):
        from . import stability as S
        target = cfg.run.get("target", "kernel")
        seed = cfg.seed
        reports = []
        if target == "kernel":
            p = cfg.kernel_params()
            try:
                bound = S.invariant_set_bound(p.resonant())
                probe = S.invariant_set_probe(p.resonant(), bound, int(cfg.run.get("n_samples", 100)),
                                              cfg.stepper.horizon, cfg.stepper.dt, seed)
                reports.append(S.StabilityReport(
                    "invariant_set", S.digest(str(p)),
                    {"alpha_V": bound, "exits": probe.exits, "n_samples": probe.n_samples},
                    "stable" if probe.exits == 0 else "inconclusive", 0.0, seed=seed))
            except ConfigError as exc:
                reports.append(S.StabilityReport("invariant_set", S.digest(str(p)),
                                                 {"reason": str(exc)}, "inconclusive", 0.0, seed=seed))
            reports.append(S.bibo_probe(p, float(cfg.run.get("a_u", 0.1 * p.gamma)),
                                        int(cfg.run.get("n_samples", 100)), cfg.stepper.horizon,
                                        cfg.stepper.dt, seed))
        elif target == "single":
            reports.append(single_cavity_certificate(cfg.atom(), cfg.env(),
                                                     cfg.cavity() if "cavity" in cfg.sections else None,
                                                     h=cfg.stepper.dt,
                                                     margin=float(cfg.run.get("margin", 0.05))))
        else:
            from .lattice import subspace_stability_report
            reports.append(subspace_stability_report(cfg.lattice()))
        self.report(reports, cfg, label)

    def run_oracle_check(self, cfg, label):
        table = oracle_check(cfg)
        tol = float(cfg.run.get("tol", 1e-6))
        path = self._path(cfg, label, "deviation", "txt")
        os.makedirs(self.out_dir, exist_ok=True)
        worst = 0.0
        with open(path, "w") as fh:
            fh.write(f"{'observable':<12} {'sup_dev':>12}\n")
            for name, (dev, _) in table.items():
                fh.write(f"{name:<12} {dev:12.3e}\n")
                worst = max(worst, dev)
            verdict = "pass" if worst < tol else "FAIL"
            fh.write(f"{verdict} (max {worst:.3e}, tol {tol:g})\n")
        print(open(path).read(), end="", file=self.stream)
        self.artifacts.append(path)
        if worst >= tol:
            raise NumericalError(f"oracle deviation {worst:.3e} exceeds {tol:g}")


def single_cavity_certificate(atom, env, cavity=None, h=0.01, horizon=None, margin=0.05):
    """Periodic/decaying split certificate for the undriven single-cavity system."""
    from .kernel import all_params, decay_rate, integrate_batch, steady_value
    from .ltv import assemble_real, steady_kernels
    from .stability import StabilityReport, corollary_report, digest
    ps = all_params(atom, env)
    kap = 0.0 if cavity is None else cavity.kappa
    inputs = {"atom": repr(atom), "env": repr(env), "kappa": kap}
    if any(steady_value(p) is None for p in ps):
        return StabilityReport("corollary", digest(inputs), {"reason": "no steady kernel"},
                               "inconclusive", margin)
    Fb = steady_kernels(atom, env)
    dets = [abs(d) for d in atom.detunings if d != 0]
    period = 2 * np.pi / min(dets) if dets else 1.0
    n = max(int(np.ceil(period / h)), 2)
    hh = period / n
    rate = min(decay_rate(q) for q in ps)
    if horizon is None:
        horizon = min(max(40.0 / max(rate, 1e-3), 10.0), 400.0)
    nh = int(np.ceil(horizon / hh))
    horizon = nh * hh
    _, Fgrid, _ = integrate_batch(ps, horizon + hh, hh / 2)

    def Ft(tt):
        return Fgrid[min(int(round(tt / (hh / 2))), len(Fgrid) - 1)]

    Abar = lambda tt: assemble_real(tt, atom, Fb, kap)
    Atil = lambda tt: assemble_real(tt, atom, Ft(tt), kap) - assemble_real(tt, atom, Fb, kap)
    return corollary_report(Abar, Atil, period, hh, horizon, params=ps, margin=margin,
                            inputs=inputs)


def oracle_check(cfg: ScenarioConfig):
    """Mean-value trajectory vs the density-matrix solver from the same pure start.

    The initial state is sqrt(ground)|0,0> + sum_n sqrt(pop_n)|n,0> + sqrt(photon)|0,1>;
    the mean-value initial condition is read off the density matrix.
    """
    from .ltv import SingleCavityState, simulate_single
    from .oracle import compare_meanfield, evolve, pure, single_cavity_model
    atom, env = cfg.atom(), cfg.env()
    cav = cfg.cavity() if "cavity" in cfg.sections else None
    ini = cfg.section("initial")
    L = atom.N - 1
    n_ph = int(cfg.run.get("n_ph", 1))
    pop = np.resize(np.asarray(ini.get("pop", [0.0] * L), float), L)
    photon = float(ini.get("photon", 0.0))
    ground = 1.0 - pop.sum() - photon
    if ground < -1e-12:
        raise ConfigError("initial pop + photon exceeds 1")
    model = single_cavity_model(atom, env, n_ph, cav)
    N = atom.N

    def ket(level, k):
        return np.kron(np.eye(N)[level], np.eye(n_ph + 1)[k])

    psi = np.sqrt(max(ground, 0.0)) * ket(0, 0) + np.sqrt(photon) * ket(0, 1)
    for n in range(L):
        psi = psi + np.sqrt(pop[n]) * ket(n + 1, 0)
    rho0 = pure(psi)
    obs = model.observables
    coh0 = np.array([np.trace(rho0 @ obs[f"coh_{n + 1}"]) for n in range(L)])
    st0 = SingleCavityState([np.trace(rho0 @ obs[f"pop_{n + 1}"]).real for n in range(L)], coh0,
                            np.trace(rho0 @ obs["photon"]).real, np.trace(rho0 @ obs["ground"]).real)
    st = cfg.stepper
    mf = simulate_single(atom, env, st0, st.horizon, st.dt, st.stride, cavity=cav)
    orc = evolve(model, rho0, st.horizon, st.dt, st.stride, names=mf.names)
    return compare_meanfield(orc, mf)


# -- entry point ------------------------------------------------------------------------

def _out_dir(arg, cfg):
    return arg or (cfg.out_dir if cfg is not None else None) or os.environ.get("NMQ_OUT") or "out"


def figure_configs(fig: str):
    if fig not in FIGURES:
        raise ConfigError(f"unknown figure {fig!r}; choose from {FIGURES}")
    paths = sorted(glob.glob(os.path.join(scenario_dir(), f"{fig}*.toml")))
    return [load_config(p) for p in paths]


def build_parser():
    ap = argparse.ArgumentParser(prog="nmq", description="Non-Markovian cavity-QED simulation "
                                 "and stability toolkit.")
    ap.add_argument("kind", choices=KINDS + ("reproduce",))
    ap.add_argument("name", nargs="?", help="figure (reproduce) or bundled scenario name")
    ap.add_argument("--config", help="scenario file (TOML)")
    ap.add_argument("--seed", type=int, help="override the RNG seed")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.kind == "reproduce":
            if not args.name:
                raise ConfigError("reproduce needs a figure name")
            cfgs = figure_configs(args.name)
        elif args.config:
            cfgs = [load_config(args.config)]
        elif args.name:
            prefix = "oracle_" if args.kind == "oracle-check" else ""
            cfgs = [bundled(prefix + args.name.replace("-", "_"))]
        else:
            raise ConfigError(f"{args.kind} needs --config or a bundled scenario name")
        for cfg in cfgs:
            if args.kind not in ("reproduce", cfg.kind):
                raise ConfigError(f"config kind {cfg.kind!r} does not match command {args.kind!r}")
            if args.seed is not None:
                cfg = replace(cfg, seed=args.seed)
            Runner(_out_dir(args.out, cfg)).run(cfg)
    except NMQError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
