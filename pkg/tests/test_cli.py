import os
import subprocess
import sys

import numpy as np
import pytest

from nmq.cli import emit_csv, main, read_csv
from nmq.config import bundled, parse_config
from nmq.errors import MissingSection, ParseError, UnknownKey
from nmq.ltv import Trajectory

KERNEL = """
kind = "kernel"
name = "k"
[env]
gamma = 2.0
Omega = 50.0
[kernel]
kappa = 1.0
chi = {chi}
[stepper]
dt = 0.01
horizon = 2.0
"""


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_parse_minimal():
    cfg = parse_config(KERNEL.format(chi=1.0))
    assert cfg.kind == "kernel" and cfg.stepper.n_steps == 200
    p = cfg.kernel_params()
    assert p.Q == -2 and p.S == 1


def test_unknown_key_suggests_nothing_silently():
    with pytest.raises(UnknownKey) as info:
        parse_config(KERNEL.format(chi=1.0).replace("gamma", "gamm"))
    assert "env.gamm" in info.value.problems


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse_config('kind = "kernel"\n[env]\ngamma = = 2\n')
    assert info.value.line == 3 and info.value.column > 0


def test_missing_section():
    with pytest.raises(MissingSection):
        parse_config('kind = "single"\n[env]\ngamma = 2.0\nOmega = 50.0\n')


@pytest.mark.parametrize("name", ["fig2", "fig3", "fig4a", "fig4b", "fig5", "fig6",
                                  "oracle_single_excitation"])
def test_bundled_scenarios_parse(name):
    cfg = bundled(name)
    assert len(list(cfg.variants())) >= 1


def test_sweep_variants():
    cfg = bundled("fig6")
    labels = [lab for lab, _ in cfg.variants()]
    assert labels == ["g_f=1", "g_f=7"]


def test_csv_header_only(tmp_path):
    tr = Trajectory(np.empty(0), ["a", "b"], np.empty((0, 2)))
    p = emit_csv(tr, tmp_path / "e.csv")
    assert open(p).read() == "t,a,b\n"
    names, t, data = read_csv(p)
    assert names == ["a", "b"] and t.size == 0


def test_csv_round_trip(tmp_path):
    t = np.array([0.0, 0.1])
    tr = Trajectory(t, ["a"], np.array([[1.0 / 3.0], [np.pi]]))
    p = emit_csv(tr, tmp_path / "r.csv")
    assert len(open(p).read().splitlines()) == 3
    names, t2, d2 = read_csv(p)
    np.testing.assert_array_equal(t2, t)
    np.testing.assert_array_equal(d2, tr.data)


def test_cli_deterministic_output(tmp_path):
    cfg = _write(tmp_path, KERNEL.format(chi=1.0))
    assert main(["kernel", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["kernel", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    a = open(tmp_path / "a" / "k.csv", "rb").read()
    b = open(tmp_path / "b" / "k.csv", "rb").read()
    assert a == b and a.startswith(b"t,R_1,I_1\n")


def test_exit_codes(tmp_path, capsys):
    bad = _write(tmp_path, KERNEL.format(chi=1.0).replace("gamma", "gamm"), "bad.toml")
    assert main(["kernel", "--config", bad, "--out", str(tmp_path)]) == 2
    assert main(["kernel", "--config", str(tmp_path / "absent.toml")]) == 2
    pole = _write(tmp_path, KERNEL.format(chi=4.0).replace("2.0\n\"\"\"", ""), "pole.toml")
    assert main(["kernel", "--config", pole, "--out", str(tmp_path)]) == 4
    single = _write(tmp_path, """
kind = "single"
[env]
gamma = 2.0
Omega = 50.0
[atom]
level_energies = [0.0, 50.0]
couplings = [0.1]
env_couplings = [1.0]
kernel_consts = [1.0]
[initial]
pop = [0.5]
ground = 0.2
""", "norm.toml")
    assert main(["single", "--config", single, "--out", str(tmp_path)]) == 3
    assert main(["single", "--config", pole, "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "UnknownKey" in err and "PoleHit" in err and "NormalizationDrift" in err


def test_oracle_check_bundled(tmp_path):
    assert main(["oracle-check", "single-excitation", "--out", str(tmp_path)]) == 0
    txt = open(tmp_path / "oracle_single_excitation_deviation.txt").read()
    assert txt.splitlines()[-1].startswith("pass")


def test_console_script(tmp_path):
    r = subprocess.run([sys.executable, "-m", "nmq.cli", "reproduce", "fig2", "--out",
                        str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert sorted(os.listdir(tmp_path)) == ["fig2_omega_tilde=45.csv", "fig2_omega_tilde=50.csv"]
