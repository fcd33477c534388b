import subprocess
import sys

import numpy as np
import pytest

import nsac1d.cli as cli
from nsac1d.cli import main
from nsac1d.diagnostics import MonitorTolerances
from nsac1d.io import read_report, write_snapshot
from nsac1d.state import Params

from conftest import equilibrium_state


def write_config(path, **kw):
    base = {"n_cells": 32, "epsilon": 0.1, "beta": 1.0, "t_end": 0.1, "ic": '"equilibrium"'}
    base.update(kw)
    path.write_text("".join(f"{k} = {v}\n" for k, v in base.items()))
    return str(path)


def test_run_equilibrium(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.toml", snapshot_every=5)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
    rep = read_report(tmp_path / "out" / "report.toml")
    assert rep.max_mass_drift == rep.max_energy_drift == 0.0
    assert rep.violation_count == 0
    index = (tmp_path / "out" / "snapshots" / "index.csv").read_text().splitlines()
    assert index[0] == "snapshot,step,time,file"
    assert index[-1].split(",")[2] == "0.10000000000000001"
    assert "completed" in capsys.readouterr().out


def test_run_is_deterministic(tmp_path):
    cfg = write_config(tmp_path / "c.toml", ic='"large_oscillation"', seed=9, snapshot_interval=0.03)
    for out in ("a", "b"):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / out)]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert len(files) >= 4
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_override_changes_data(tmp_path):
    cfg = write_config(tmp_path / "c.toml", ic='"large_oscillation"', t_end=0.01)
    main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
    a = (tmp_path / "a" / "snapshots" / "snap_000000.csv").read_bytes()
    b = (tmp_path / "b" / "snapshots" / "snap_000000.csv").read_bytes()
    assert a != b


def test_check_rejects_phase_out_of_range(tmp_path, capsys):
    s = equilibrium_state(32)
    phi = s.phi.copy()
    phi[7] = 1.5
    write_snapshot(s.replace(phi=phi), Params(0.1, 1.0), tmp_path / "bad.csv")
    cfg = write_config(tmp_path / "c.toml", ic='"bad.csv"')
    assert main(["check", "--config", cfg]) != 0
    out = capsys.readouterr().out
    assert "phi0 in [-1,1]" in out and "index 7" in out


def test_check_and_run_from_file(tmp_path, capsys):
    s = equilibrium_state(32, v=2.0)
    write_snapshot(s, Params(0.1, 1.0), tmp_path / "ic.csv")
    cfg = write_config(tmp_path / "c.toml", ic='"ic.csv"')
    assert main(["check", "--config", cfg]) == 0
    assert "mass 1\n" in capsys.readouterr().out
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0


def test_ic_file_with_wrong_size(tmp_path):
    write_snapshot(equilibrium_state(16), Params(0.1, 1.0), tmp_path / "ic.csv")
    cfg = write_config(tmp_path / "c.toml", ic='"ic.csv"')
    assert main(["check", "--config", cfg]) == 64


def test_convergence_sine(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.toml", ic='"sine_perturbation"', t_end=0.5)
    assert main(["convergence", "--config", cfg, "--grids", "64,128,256", "--workers", "3"]) == 0
    out = capsys.readouterr().out
    assert "order" in out and "exact" in out and "PASS" in out


def test_step_failure_exit_code(tmp_path):
    cfg = write_config(tmp_path / "c.toml", dt_min=0.5, t_end=1.0)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert read_report(tmp_path / "o" / "report.toml").status == "failed"


def test_fail_fast_on_injected_violation(tmp_path, monkeypatch):
    # a negative phase tolerance turns the interface plateau into a violation
    monkeypatch.setattr(cli, "MonitorTolerances", lambda: MonitorTolerances(phi=-0.01))
    cfg = write_config(tmp_path / "c.toml", ic='"tanh_interface"')
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    rep = read_report(tmp_path / "a" / "report.toml")
    assert rep.violation_count >= 1
    assert {v.check for v in rep.violations} >= {"phi <= 1", "phi >= -1"}
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--fail-fast"]) == 2
    assert read_report(tmp_path / "b" / "report.toml").status == "stopped"


@pytest.mark.parametrize("argv", [
    [],
    ["fly"],
    ["run"],
    ["run", "--config"],
    ["convergence", "--config", "x.toml", "--grids", "64,100,256"],
    ["run", "--config", "x.toml", "--seed", "-4"],
])
def test_usage_errors(tmp_path, argv):
    write_config(tmp_path / "x.toml")
    argv = [str(tmp_path / a) if a == "x.toml" else a for a in argv]
    assert main(argv) == 64


def test_bad_config_exit_code(tmp_path, capsys):
    path = write_config(tmp_path / "c.toml", epsilon=-1)
    assert main(["check", "--config", path]) == 64
    assert "epsilon" in capsys.readouterr().err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "nsac1d", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "convergence" in out.stdout


@pytest.mark.parametrize("name", ["equilibrium", "sine_perturbation", "tanh_interface",
                                  "large_oscillation"])
def test_shipped_configs_check_clean(name):
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "configs" / f"{name}.toml"
    assert main(["check", "--config", str(path)]) == 0
