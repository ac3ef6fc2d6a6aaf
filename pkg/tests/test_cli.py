import subprocess
import sys

import numpy as np
import pytest

from sourceiter.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_VERIFY, run_cli

SMALL = "grid.nz = 21\ngrid.n_nu = 48\nkappa.source = constant\nkappa.value = 0.5\n"


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def test_solve_writes_tables(small_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert run_cli(["solve", "--config", str(small_cfg), "--out", str(out), "--eps", "0.01"]) == EXIT_OK
    assert "converged=True" in capsys.readouterr().out
    for name in ("temperature.txt", "spectra_z0.txt", "spectra_zZ.txt", "convergence.txt", "diagnostic.txt"):
        assert (out / name).stat().st_size > 0
    assert np.loadtxt(out / "temperature.txt").shape == (21, 4)


def test_unconverged_run_is_a_numerical_failure(tmp_path):
    cfg = tmp_path / "short.cfg"
    cfg.write_text(SMALL + "solver.max_iter = 2\n")
    assert run_cli(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_NUMERIC


def test_usage_and_config_errors(tmp_path, capsys):
    assert run_cli(["solve", "--bogus"]) == EXIT_CONFIG
    assert run_cli([]) == EXIT_CONFIG
    assert run_cli(["solve", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    bad = tmp_path / "bad.cfg"
    bad.write_text("grid.nz = many\n")
    assert run_cli(["diag", "--config", str(bad)]) == EXIT_CONFIG
    assert "line 1" in capsys.readouterr().err


def test_co2_flag_requires_table(small_cfg):
    assert run_cli(["diag", "--config", str(small_cfg), "--co2", "0.1"]) == EXIT_CONFIG


def test_verify_quick(capsys):
    assert run_cli(["verify", "--quick"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("PASS kernel precision")


def test_full_verify_reports_the_refraction_bound_failure(capsys):
    assert run_cli(["verify"]) == EXIT_VERIFY
    out = capsys.readouterr().out
    assert "PASS attenuation bound eps=0.0" in out
    assert "FAIL attenuation bound eps=0.01" in out


def test_diag_and_table(small_cfg, tmp_path, capsys):
    assert run_cli(["diag", "--config", str(small_cfg)]) == EXIT_OK
    assert "eta_ratio" in capsys.readouterr().out
    assert run_cli(["table", "--config", str(small_cfg), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "kernel_table.npz").is_file()


def test_reconstruct_exports_surfaces(small_cfg, tmp_path, capsys):
    assert run_cli(["reconstruct", "--config", str(small_cfg), "--out", str(tmp_path), "--eps", "0.01",
                    "--nu", "0.2"]) == EXIT_OK
    text = (tmp_path / "surface_I_nu0.2.txt").read_text()
    assert "nan" in text
    assert (tmp_path / "surface_Q_nu0.2.txt").is_file()
    assert "moment check" in capsys.readouterr().out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "sourceiter", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "verify" in r.stdout
