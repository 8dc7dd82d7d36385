import os
import subprocess
import sys

import numpy as np

SCRIPT = r"""
import sys
import numpy as np
from nmq import USE_NUMBA
from nmq.kernel import KernelParams, integrate_batch
from nmq.lattice import fig6_spec, simulate_lattice
from nmq.ltv import SingleCavityState, simulate_single
from nmq.model import AtomSpec, EnvSpec
_, F, _ = integrate_batch([KernelParams(1.0, 2.0, 0.5, 1.0)], 3.0, 0.01)
atom = AtomSpec([0.0, 37.7, 75.3], [0.02, 0.02], [0.31, 0.31], [1.0, 1.0], detunings=[-0.02, -0.07])
tr = simulate_single(atom, EnvSpec(10.0, 50.0), SingleCavityState([0.0, 1.0], [0, 0]), 3.0)
lt = simulate_lattice(fig6_spec(1.0), t_end=2.0)
np.savez(sys.argv[1], F=F, single=tr.data, lattice=lt.data, numba=USE_NUMBA)
"""


def _run(tmp_path, disable):
    env = dict(os.environ)
    env.pop("NMQ_DISABLE_NUMBA", None)
    if disable:
        env["NMQ_DISABLE_NUMBA"] = "1"
    out = str(tmp_path / f"r{int(disable)}.npz")
    subprocess.run([sys.executable, "-c", SCRIPT, out], check=True, env=env)
    return np.load(out)


def test_numpy_fallback_matches_compiled(tmp_path):
    a = _run(tmp_path, False)
    b = _run(tmp_path, True)
    assert not bool(b["numba"])
    for key in ("F", "single", "lattice"):
        np.testing.assert_allclose(a[key], b[key], rtol=0, atol=1e-12)
