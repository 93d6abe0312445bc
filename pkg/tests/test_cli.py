"""Command-line interface: exit codes, artifacts and determinism."""
import os
import subprocess
import sys

import pytest

from cdpde.cli import main


def run_cli(*args):
    return main(list(args))


class TestExitCodes:
    def test_algebra_check_ok(self, capsys):
        assert run_cli("algebra-check", "--level", "2") == 0
        assert run_cli("algebra-check", "--level", "4") == 0
        out = capsys.readouterr().out
        assert "breakdown-witness" in out

    def test_invalid_scenario_is_validation_error(self, tmp_path, capsys):
        rc = run_cli("solve", "--scenario", "nope", "--out", str(tmp_path))
        assert rc == 2
        assert not any(tmp_path.iterdir())

    def test_bad_scenario_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text("family = 'ex3_13'\na = 9.0\nb = 2.0\n")
        rc = run_cli("solve", "--scenario", str(bad), "--out", str(tmp_path / "o"))
        assert rc == 2

    def test_catalog(self, capsys):
        assert run_cli("catalog") == 0
        out = capsys.readouterr().out
        assert "kdv_4_2" in out and "ex3_7" in out


class TestArtifacts:
    def test_solve_writes_everything(self, tmp_path, capsys):
        rc = run_cli("solve", "--scenario", "ex3_8", "--out", str(tmp_path),
                     "--verbose")
        assert rc == 0
        for fn in ("convergence.csv", "residual.csv", "profile.csv",
                   "run_info.txt", "results.csv", "k_lattice.csv",
                   "quad_diagnostics.csv"):
            assert (tmp_path / fn).exists(), fn
        header = (tmp_path / "residual.csv").read_text().splitlines()[0]
        assert header.startswith("# cdpde=") and "scenario=ex3_8" in header
        assert "seed=0" in header

    def test_identity_check_writes_defects(self, tmp_path, capsys):
        rc = run_cli("identity-check", "--family", "cor2_6", "--m", "2",
                     "--out", str(tmp_path), "--pairs", "2")
        assert rc == 0
        text = (tmp_path / "defects.csv").read_text()
        assert "family,identity,m,pair,defect" in text

    def test_residual_subcommand_skips_kernel_dump(self, tmp_path, capsys):
        rc = run_cli("residual", "--scenario", "ex3_8", "--out", str(tmp_path))
        assert rc == 0
        assert not (tmp_path / "k_lattice.csv").exists()
        assert (tmp_path / "residual.csv").exists()


class TestDeterminism:
    def test_reruns_are_byte_identical(self, tmp_path, capsys):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        assert run_cli("solve", "--scenario", "ex3_12", "--out", str(out1),
                       "--seed", "3") == 0
        assert run_cli("solve", "--scenario", "ex3_12", "--out", str(out2),
                       "--seed", "3") == 0
        for fn in sorted(os.listdir(out1)):
            b1 = (out1 / fn).read_bytes()
            b2 = (out2 / fn).read_bytes()
            assert b1 == b2, fn

    def test_entry_point_runs(self):
        proc = subprocess.run([sys.executable, "-m", "cdpde.cli", "catalog"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "newtonian_4_3" in proc.stdout


class TestDivergenceExit:
    def test_divergent_coupling_exits_3(self, tmp_path, capsys):
        rc = run_cli("solve", "--scenario", "ex3_8", "--p", "60.0",
                     "--out", str(tmp_path / "d"))
        assert rc == 3
