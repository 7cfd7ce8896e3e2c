"""命令列介面."""

import json

import pandas as pd
import pytest
from click.testing import CliRunner

from src.cli import main
from src.storage import MANIFEST_NAME, autocorr_name, read_matrix_csv, write_matrix_csv
from src.tmf import make_time_grid

RECONSTRUCTION_FILES = ("rho.re.csv", "rho.im.csv", "profile.csv", "cuts.csv", "report.txt")


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def simulated(runner, tmp_path):
    out = tmp_path / "sim"
    result = runner.invoke(main, ["simulate", "--tmf", "rabi", "--out", str(out), "--seed", "3"])
    assert result.exit_code == 0, result.output
    return out


class TestSimulate:
    def test_writes_matrices_and_manifest(self, simulated):
        manifest = json.loads((simulated / MANIFEST_NAME).read_text(encoding="utf-8"))
        assert len(manifest["datasets"]) == 8
        for index in range(8):
            assert (simulated / autocorr_name(index)).is_file()
        assert (simulated / "tmf.csv").is_file()
        assert manifest["seed"] == 3
        assert "block_size" in manifest
        assert set(manifest["files"]) >= {MANIFEST_NAME, "tmf.csv", autocorr_name(7)}

    def test_sampled_with_traces(self, runner, tmp_path):
        out = tmp_path / "sampled"
        result = runner.invoke(main, [
            "simulate", "--tmf", "rabi", "--out", str(out),
            "--samples", "200", "--detunings", "0,13", "--save-traces", "binary",
        ])
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / MANIFEST_NAME).read_text(encoding="utf-8"))
        assert [d["n_samples"] for d in manifest["datasets"]] == [200, 200]
        assert (out / "autocorr_01.stderr.csv").is_file()
        assert (out / "traces_01.bin").is_file()

    def test_missing_tmf_is_usage_error(self, runner, tmp_path):
        result = runner.invoke(main, ["simulate", "--out", str(tmp_path / "x")])
        assert result.exit_code == 2

    def test_bad_config_value(self, runner, tmp_path):
        result = runner.invoke(main, ["simulate", "--tmf", "rabi", "--samples", "1", "--out", str(tmp_path)])
        assert result.exit_code == 2

    def test_config_file(self, runner, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text(f"tmf_model = exponential\nn_bins = 16\nout_dir = {tmp_path / 'cfg'}\n", encoding="utf-8")
        result = runner.invoke(main, ["simulate", "--config", str(config)])
        assert result.exit_code == 0, result.output
        grid, _ = read_matrix_csv(tmp_path / "cfg" / autocorr_name(0))
        assert grid.n_bins == 16


class TestReconstruct:
    def test_outputs(self, runner, simulated):
        result = runner.invoke(main, ["reconstruct", str(simulated)])
        assert result.exit_code == 0, result.output
        for name in RECONSTRUCTION_FILES:
            assert (simulated / name).is_file()
        assert "unidentifiable-im" in (simulated / "report.txt").read_text(encoding="utf-8")

    def test_report_lists_detunings_in_mhz(self, runner, simulated):
        runner.invoke(main, ["reconstruct", str(simulated)])
        report = (simulated / "report.txt").read_text(encoding="utf-8")
        assert "失諧 (Δω/2π, MHz): -10, -5, 0, 3, 8, 13, 18, 23" in report

    def test_byte_identical_rerun(self, runner, simulated, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        for out in (first, second):
            result = runner.invoke(main, ["reconstruct", str(simulated), "--out", str(out)])
            assert result.exit_code == 0, result.output
        for name in RECONSTRUCTION_FILES:
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_grid_mismatch(self, runner, simulated):
        grid = make_time_grid(0, 20, 64)
        _, values = read_matrix_csv(simulated / autocorr_name(4))
        write_matrix_csv(simulated / autocorr_name(4), grid.centers, values)
        result = runner.invoke(main, ["reconstruct", str(simulated)])
        assert result.exit_code == 2

    def test_missing_directory(self, runner, tmp_path):
        result = runner.invoke(main, ["reconstruct", str(tmp_path / "nothing")])
        assert result.exit_code == 2

    def test_homodyne_only_dataset(self, runner, tmp_path):
        out = tmp_path / "homodyne"
        runner.invoke(main, ["simulate", "--tmf", "rabi", "--out", str(out), "--detunings", "0"])
        result = runner.invoke(main, ["reconstruct", str(out)])
        assert result.exit_code == 0, result.output
        assert (out / "homodyne_profile.csv").is_file()


class TestAnalyze:
    def test_profile(self, runner, simulated):
        result = runner.invoke(main, ["analyze", str(simulated), "--normalize-peak"])
        assert result.exit_code == 0, result.output
        header = (simulated / "homodyne_profile.csv").read_text().splitlines()[0]
        assert header == "tau_ns,amp_sq,re_phi_scaled"

    def test_needs_zero_detuning(self, runner, tmp_path):
        out = tmp_path / "hetero"
        runner.invoke(main, ["simulate", "--tmf", "rabi", "--out", str(out), "--detunings", "8,13"])
        result = runner.invoke(main, ["analyze", str(out)])
        assert result.exit_code == 2


class TestRoundtrip:
    def test_exact_passes(self, runner, tmp_path):
        result = runner.invoke(main, ["roundtrip", "--tmf", "rabi", "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        assert "PASS" in result.output

    def test_vacuum_fails(self, runner, tmp_path):
        result = runner.invoke(main, ["roundtrip", "--tmf", "rabi", "--eta", "0", "--out", str(tmp_path)])
        assert result.exit_code == 1
        assert "degenerate trace" in result.output


class TestOracle:
    def test_passes(self, runner):
        result = runner.invoke(main, ["oracle", "--trials", "20", "--seed", "1"])
        assert result.exit_code == 0, result.output
        assert "PASS" in result.output

    def test_grid_steps_floor(self, runner):
        result = runner.invoke(main, ["oracle", "--grid-steps", "50"])
        assert result.exit_code == 2


class TestResolution:
    def test_writes_table(self, runner, tmp_path):
        result = runner.invoke(main, ["resolution", "--tmf", "exponential", "--out", str(tmp_path), "--factors", "1,2,4"])
        assert result.exit_code == 0, result.output
        table = pd.read_csv(tmp_path / "resolution.csv")
        assert list(table.columns) == ["factor", "resolution_ns", "n_bins", "purity"]
        assert table["resolution_ns"].tolist() == [10.0, 20.0, 40.0]
        assert table["purity"].tolist() == pytest.approx([1.0, 1.0, 1.0], abs=1e-12)

    def test_rabi_loses_purity(self, runner, tmp_path):
        result = runner.invoke(main, ["resolution", "--tmf", "rabi", "--out", str(tmp_path), "--factors", "1,4"])
        assert result.exit_code == 0, result.output
        purity = pd.read_csv(tmp_path / "resolution.csv")["purity"]
        assert purity[0] == pytest.approx(1.0, abs=1e-12)
        assert purity[1] < purity[0]

    @pytest.mark.parametrize("factors", ["3", "a,b"])
    def test_bad_factors(self, runner, tmp_path, factors):
        result = runner.invoke(main, ["resolution", "--tmf", "rabi", "--out", str(tmp_path), "--factors", factors])
        assert result.exit_code == 2
