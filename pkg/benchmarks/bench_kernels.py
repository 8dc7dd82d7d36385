"""Compiled vs interpreted hot loops.

Runs each kernel loop through numba and through its ``py_func`` (the same
source executed by CPython/numpy) and prints wall times and the speed-up.
Set NMQ_DISABLE_NUMBA=1 to make both columns interpreted.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from nmq import _kernels as K
from nmq._accel import USE_NUMBA, py_func
from nmq.kernel import KernelParams
from nmq.lattice import _arrays, fig6_spec, site_params, validate_lattice


def _time(fn, repeat):
    fn()                                  # warm-up / compile
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    B = 64
    p = KernelParams(1.0, 2.0, 0.8, 0.0)
    F0 = np.zeros(B, complex)
    kk = np.full(B, p.kappa, complex)
    Q = np.full(B, p.Q, complex)
    S = np.full(B, p.S, complex)
    yield ("riccati_rk4_batch (64 x 2000 steps)",
           lambda f: f(F0, kk, Q, S, 0.01, 2000, 10, 1e6), K.riccati_rk4_batch)

    L = 2
    z0 = np.zeros(3 * L + 2, complex)
    z0[3 * (L - 1)] = 1.0
    g = np.full(L, 0.02)
    dl = np.array([-0.02, -0.07])
    kap = np.full(L, 0.31)
    kk2 = kap.astype(complex)
    Q2 = np.array([-(10 + 12.3j), -(10 + 12.4j)])
    S2 = np.full(L, 5.0 + 0j)
    yield ("ltv_rk4 N=3 (2000 steps)",
           lambda f: f(K.MODEL_COMPLEX, z0, np.zeros(L, complex), kk2, Q2, S2, g, dl, kap, 0.0, 0.0,
                       False, 0.01, 2000, 10, 1e6), K.ltv_rk4)

    spec = validate_lattice(fig6_spec(1.0))
    ps = site_params(spec)
    gg, dlt, kp, par = _arrays(spec)
    par[5] = 0.2
    X0 = np.zeros(8)
    X0[4::2] = 1.0
    kk3 = np.array([q.kappa for q in ps], complex)
    Q3 = np.array([q.Q for q in ps])
    S3 = np.array([q.S for q in ps], complex)
    yield ("lattice_rk4 M=2 (2000 steps)",
           lambda f: f(X0, np.zeros(2, complex), kk3, Q3, S3, gg, dlt, kp, par, 0.01, 2000, 10, 1e6),
           K.lattice_rk4)

    y0 = np.array([0.0, 0.0, 1.0], complex)
    n = 2000
    Fg = np.full(2 * n + 1, 0.5 + 0j)
    apar = np.array([0.2, 0.0, 1.0, 0.0, 0.2, 0.01, 1.0, 0.0])
    dW = np.random.default_rng(0).standard_normal((32, n)) * 0.1
    yield ("atomic_fb_em (32 traj x 2000 steps)",
           lambda f: f(y0, Fg, Fg, apar, 0.01, dW, 10), K.atomic_fb_em)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"numba enabled: {USE_NUMBA}")
    print(f"{'loop':<40} {'compiled [s]':>13} {'python [s]':>11} {'speed-up':>9}")
    for name, call, fn in cases():
        tc = _time(lambda: call(fn), args.repeat)
        tp = _time(lambda: call(py_func(fn)), 1)
        print(f"{name:<40} {tc:13.4g} {tp:11.4g} {tp / tc:9.1f}")


if __name__ == "__main__":
    main()
