"""CLI surface exports, metadata, policy reload, modes and exit codes."""

import json

import numpy as np
import pytest

from gasplant.cli import grid_hash, main
from gasplant.solver import GridSpec

TOY = """
[grid]
s_e_max = 100.0
s_g_max = 10.0
n_e = 2
n_g = 2
n_l = 2
m = 400

[model]
discount_rate = 0.05
horizon = 5.0

[[model.regimes]]
alpha_e = 0.1
alpha_g = 0.2
sigma_e = 0.1
sigma_g = 0.1
rho = 0.1
jump_e = { intensity = 0.0 }
jump_g = { intensity = 0.0 }
seasonality_e = { amplitude = 0.0, offset = 40.0 }
seasonality_g = { amplitude = 0.0, offset = 4.0 }

[simulate]
step = 0.5
paths = 16
seed = 3
start_s_e = 40.0
start_s_g = 4.0
start_L = 300.0
"""


@pytest.fixture()
def toy_config(tmp_path):
    p = tmp_path / "toy.toml"
    p.write_text(TOY)
    return p


@pytest.fixture()
def solved_dir(toy_config, tmp_path):
    out = tmp_path / "out"
    assert main(["--config", str(toy_config), "--out", str(out)]) == 0
    return out


class TestSolveExport:
    def test_csv_layout(self, solved_dir):
        lines = (solved_dir / "value_r0_snap000.csv").read_text().splitlines()
        assert lines[0] == "S_e,S_g,L,value"
        assert len(lines) == 1 + 3 * 3 * 3  # header + full 3x3x3 lattice
        first = lines[1].split(",")
        assert [float(v) for v in first[:3]] == [0.0, 0.0, 20.0]

    def test_metadata_contents(self, solved_dir):
        meta = json.loads((solved_dir / "metadata.json").read_text())
        assert meta["grid"]["n_e"] == 2 and meta["grid"]["m"] == 400
        assert meta["delta_tau"] == pytest.approx(5.0 / 400)
        assert meta["snapshot_taus"] == [5.0]
        assert meta["config"]["model"]["horizon"] == 5.0
        assert len(meta["files"]) == 2  # one value + one control surface
        g = GridSpec(S_e_max=100.0, S_g_max=10.0, N_e=2, N_g=2, N_L=2)
        assert meta["grid_hash"] == grid_hash(g, 20.0, 600.0)

    def test_reexport_is_byte_identical(self, toy_config, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["--config", str(toy_config), "--out", str(a)]) == 0
        assert main(["--config", str(toy_config), "--out", str(b)]) == 0
        for name in ("value_r0_snap000.csv", "control_r0_snap000.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_controls_within_ramp_bounds(self, solved_dir):
        from gasplant.plant import PlantSpec, control_bounds

        data = np.loadtxt(solved_dir / "control_r0_snap000.csv", delimiter=",", skiprows=1)
        lo, hi = control_bounds(PlantSpec(), data[:, 2])
        # the CSV carries 9 significant digits, so allow for that rounding
        tol = 1e-8 * PlantSpec().c_abs_max
        assert np.all(data[:, 3] >= lo - tol)
        assert np.all(data[:, 3] <= hi + tol)

    def test_plot_scripts_emitted(self, toy_config, tmp_path):
        out = tmp_path / "plots"
        rc = main(["--config", str(toy_config), "--out", str(out), "--emit-plots"])
        assert rc == 0
        scripts = sorted(out.glob("plot_*.py"))
        assert scripts  # one per configured slice and surface kind
        text = scripts[0].read_text()
        assert "matplotlib" in text and ".png" in text


class TestSimulateMode:
    def test_simulate_after_solve(self, toy_config, solved_dir):
        rc = main(["--config", str(toy_config), "--mode", "simulate",
                   "--out", str(solved_dir)])
        assert rc == 0
        res = json.loads((solved_dir / "simulate_result.json").read_text())
        assert res["paths"] == 16
        assert np.isfinite(res["mean"]) and res["standard_error"] >= 0

    def test_seed_override_recorded(self, toy_config, solved_dir):
        rc = main(["--config", str(toy_config), "--mode", "simulate",
                   "--out", str(solved_dir), "--seed", "99"])
        assert rc == 0
        res = json.loads((solved_dir / "simulate_result.json").read_text())
        assert res["seed"] == 99

    def test_grid_mismatch_refused(self, toy_config, solved_dir, tmp_path, capsys):
        other = tmp_path / "other.toml"
        other.write_text(TOY.replace("n_e = 2", "n_e = 3"))
        rc = main(["--config", str(other), "--mode", "simulate",
                   "--out", str(solved_dir)])
        assert rc == 2
        assert "grid hash mismatch" in capsys.readouterr().err

    def test_simulate_without_solve_refused(self, toy_config, tmp_path):
        rc = main(["--config", str(toy_config), "--mode", "simulate",
                   "--out", str(tmp_path / "empty")])
        assert rc == 2


class TestValidateMode:
    def test_validate_passes_on_toy(self, toy_config, capsys):
        rc = main(["--config", str(toy_config), "--mode", "validate"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "[PASS]" in out and "[FAIL]" not in out


class TestExitCodes:
    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["--config", str(tmp_path / "nope.toml")]) == 4

    def test_malformed_config(self, tmp_path, capsys):
        p = tmp_path / "bad.toml"
        p.write_text("not toml ===")
        assert main(["--config", str(p)]) == 2

    def test_invalid_snapshot_override(self, toy_config):
        assert main(["--config", str(toy_config), "--snapshots", "7.5;bad"]) == 2

    def test_snapshot_beyond_horizon(self, toy_config, tmp_path):
        rc = main(["--config", str(toy_config), "--snapshots", "9.0",
                   "--out", str(tmp_path / "x")])
        assert rc == 2
