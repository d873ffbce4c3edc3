# [file name]: tests/test_cli.py
import csv
import logging
from pathlib import Path

import numpy as np
import pytest

from atomsense import __version__
from atomsense.cli import build_parser, consume_campaign, main
from atomsense.errors import FringeLost
from atomsense.physics_core import G_LOCAL as G
from atomsense.sensors_and_noise import VibrationModel
from atomsense.sequencer import CycleConfig, StaticScene, run_static_campaign
from utils.log import get_logger
from utils.run_data_manager import read_csv_columns, read_csv_metadata, read_trace_header
from utils.stream_processor import CampaignStreamProcessor

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

SMALL_DYNAMIC = """
[sequencer]
shots_per_point = 16

[dynamic]
omega_d_mrad_s = [1.0]
n_mc_atoms = 400
"""


def read_table(path):
    with open(path, encoding="utf-8", newline="") as f:
        rows = [row for row in csv.reader(f) if row and not row[0].startswith("#")]
    return rows[0], rows[1:]


def run(*argv):
    return main([str(a) for a in argv])


class Test_budget:
    def test_writes_table(self, tmp_path):
        assert run("budget", "--config", SCENARIOS / "budget.yaml", "--out-dir", tmp_path, "--no-plot") == 0
        header, rows = read_table(tmp_path / "budget.csv")
        assert header == ["term", "axis", "value", "units", "inputs_hash"]
        values = {row[0]: float(row[2]) for row in rows}
        assert values["tilt_gravity"] == pytest.approx(G * (1 - np.cos(1e-3)))
        assert values["wavefront_optical_quality"] == pytest.approx(1.863e-5, rel=2e-3)
        meta = read_csv_metadata(tmp_path / "budget.csv")
        assert meta["command"] == "budget"
        assert len(meta["config_hash"]) == 16

    def test_plot_written(self, tmp_path):
        pytest.importorskip("matplotlib")
        assert run("budget", "--out-dir", tmp_path, "--plot") == 0
        assert (tmp_path / "budget.svg").exists()
        svg = (tmp_path / "budget.svg").read_text(encoding="utf-8")
        meta = read_csv_metadata(tmp_path / "budget.csv")
        assert f"config_hash={meta['config_hash']} seed={meta['seed']}" in svg


class Test_exit_codes:
    def test_config_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text("[interferometer]\nT = 40\n")
        assert run("budget", "--config", bad, "--out-dir", tmp_path) == 2
        assert "missing unit suffix" in capsys.readouterr().err

    def test_malformed_csv_reports_line(self, tmp_path, capsys):
        data = tmp_path / "series.csv"
        data.write_text("# comment\nt_s,x\n0.0,1.0\n1.0,abc\n2.0,3.0\n")
        assert run("allan", "--input", data, "--column", "x", "--out-dir", tmp_path) == 2
        assert f"{data}:4:" in capsys.readouterr().err

    def test_runtime_error(self, tmp_path, capsys):
        data = tmp_path / "series.csv"
        data.write_text("t_s,x\n0.0,1.0\n1.0,2.0\n")
        assert run("allan", "--input", data, "--column", "x", "--out-dir", tmp_path) == 3
        assert "Error:" in capsys.readouterr().err

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(["--version"])
        assert info.value.code == 0
        assert __version__ in capsys.readouterr().out


class Test_allan:
    def test_idempotent(self, tmp_path, rng):
        data = tmp_path / "series.csv"
        t = np.arange(512) * 4.0
        values = rng.normal(size=t.size)
        data.write_text("t_s,x\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(t, values)))
        first, second = tmp_path / "one", tmp_path / "two"
        assert run("allan", "--input", data, "--column", "x", "--out-dir", first, "--no-plot") == 0
        assert run("allan", "--input", data, "--column", "x", "--out-dir", second, "--no-plot") == 0
        assert (first / "adev_x.csv").read_bytes() == (second / "adev_x.csv").read_bytes()
        adev = read_csv_columns(first / "adev_x.csv")
        assert adev["tau_s"][0] == 4.0

    def test_explicit_dt(self, tmp_path, rng):
        data = tmp_path / "series.csv"
        data.write_text("x\n" + "".join(f"{v!r}\n" for v in rng.normal(size=90)))
        assert run("allan", "--input", data, "--column", "x", "--dt", "0.5", "--out-dir", tmp_path, "--no-plot") == 0
        assert read_csv_columns(tmp_path / "adev_x.csv")["tau_s"][0] == 0.5

    def test_non_uniform_time_needs_dt(self, tmp_path):
        data = tmp_path / "series.csv"
        data.write_text("t_s,x\n0.0,1.0\n1.0,2.0\n3.0,1.0\n4.0,2.0\n")
        assert run("allan", "--input", data, "--column", "x", "--out-dir", tmp_path) == 2


class Test_static_run:
    @pytest.fixture(scope="class")
    def outputs(self, tmp_path_factory):
        base = tmp_path_factory.mktemp("static")
        for threads in (1, 4):
            code = run("static-run", "--duration", 40, "--seed", 5, "--threads", threads,
                       "--out-dir", base / f"t{threads}", "--no-plot")
            assert code == 0
        return base

    def test_thread_count_does_not_change_results(self, outputs):
        for name in ("campaign.csv", "classical.csv", "hybrid_rotation.csv", "noise_floors.csv"):
            assert (outputs / "t1" / name).read_bytes() == (outputs / "t4" / name).read_bytes()

    def test_campaign_columns(self, outputs):
        campaign = read_csv_columns(outputs / "t1" / "campaign.csv")
        np.testing.assert_allclose(campaign["t_s"], 4.0 * np.arange(10))
        assert np.all(np.abs(campaign["a_mps2"] - G) < 1e-4)
        assert np.all(np.abs(campaign["omega_rads"] - 4.82e-5) < 1e-4)
        shots = read_table(outputs / "t1" / "correlation.csv")[1]
        assert len(shots) == 40
        gains = read_table(outputs / "t1" / "gains.csv")[1]
        assert [row[0] for row in gains] == ["accel", "rotation"]

    def test_correlation_table(self, outputs):
        table = read_csv_columns(outputs / "t1" / "correlation.csv",
                                 ["alpha_accel_mps2", "alpha_centered_mps2", "a_conv_mps2"])
        assert table["alpha_centered_mps2"].size == 40
        assert abs(np.mean(table["alpha_centered_mps2"])) < 1e-9
        assert np.all(np.abs(table["alpha_accel_mps2"] - G) < 1e-4)

    def test_trace_header(self, tmp_path):
        config = tmp_path / "traces.toml"
        config.write_text("[output]\nsave_traces = true\n")
        assert run("static-run", "--config", config, "--duration", 8, "--seed", 9, "--out-dir", tmp_path,
                   "--no-plot") == 0
        header = read_trace_header(tmp_path / "vibration.bin")
        meta = read_csv_metadata(tmp_path / "campaign.csv")
        assert header.config_hash == meta["config_hash"]
        assert header.seed == 9

    def test_hybridize_round_trip(self, outputs, tmp_path):
        src = outputs / "t1"
        code = run("hybridize", "--campaign", src / "campaign.csv", "--classical", src / "classical.csv",
                   "--out-dir", tmp_path, "--no-plot")
        assert code == 0
        assert (tmp_path / "hybrid_accel.csv").read_bytes().split(b"\n", 3)[3] == \
            (src / "hybrid_accel.csv").read_bytes().split(b"\n", 3)[3]

    def test_noiseless_scenario(self, tmp_path):
        code = run("static-run", "--config", SCENARIOS / "noiseless.toml", "--duration", 40, "--out-dir", tmp_path)
        assert code == 0
        campaign = read_csv_columns(tmp_path / "campaign.csv")
        np.testing.assert_allclose(campaign["a_mps2"], G, rtol=1e-9)
        np.testing.assert_allclose(campaign["omega_rads"], 4.82e-5, rtol=1e-9)


class Test_dynamic_run:
    @pytest.fixture(scope="class")
    def outputs(self, tmp_path_factory):
        base = tmp_path_factory.mktemp("dynamic")
        config = base / "small.toml"
        config.write_text(SMALL_DYNAMIC)
        for threads in (1, 3):
            code = run("dynamic-run", "--config", config, "--threads", threads, "--out-dir", base / str(threads),
                       "--no-plot")
            assert code == 0
        return base

    def test_thread_count_does_not_change_results(self, outputs):
        summary = (outputs / "1" / "dynamic_summary.csv").read_bytes()
        assert summary == (outputs / "3" / "dynamic_summary.csv").read_bytes()

    def test_both_launch_directions(self, outputs):
        table = read_csv_columns(outputs / "1" / "dynamic_summary.csv", allow_missing=["temperature_fit_uk"])
        np.testing.assert_array_equal(table["v_sign"], [1, -1])
        np.testing.assert_array_equal(table["fit_ok"], [1, 1])
        for recovered, classical, effective in zip(table["recovered_rad_s"], table["classical_rad_s"],
                                                   table["effective_rate_rad_s"]):
            assert recovered == pytest.approx(effective, rel=0.1)
            assert classical == pytest.approx(effective, rel=0.01)
        # a single drive amplitude cannot constrain the contrast decay
        assert np.all(np.isnan(table["temperature_fit_uk"]))

    def test_fringe_table(self, outputs):
        header, rows = read_table(outputs / "1" / "fringe_1mrad.csv")
        assert header == ["config", "alpha_rad_s2", "alpha_corrected_rad_s2", "p2"]
        assert len(rows) == 4 * 16
        assert {row[0] for row in rows} == {"pk_pv", "mk_pv", "pk_mv", "mk_mv"}

    def test_contrast_temperature_column(self, tmp_path):
        config = tmp_path / "sweep.toml"
        config.write_text(SMALL_DYNAMIC.replace("[1.0]", "[1.0, 2.0, 3.0]").replace("400", "2000"))
        assert run("dynamic-run", "--config", config, "--out-dir", tmp_path, "--no-plot") == 0
        table = read_csv_columns(tmp_path / "dynamic_summary.csv", allow_missing=["temperature_fit_uk"])
        fitted = table["temperature_fit_uk"][table["fit_ok"] == 1]
        assert fitted.size >= 3
        assert np.all(fitted > 0)


class Test_velocimetry:
    def test_short_campaign(self, tmp_path):
        config = tmp_path / "v.toml"
        config.write_text("[velocimetry]\ntpls_pulses_us = [10.0, 40.0]\n")
        code = run("velocimetry", "--config", config, "--n-spectra", 3, "--out-dir", tmp_path, "--no-plot")
        assert code == 0
        velocity = read_csv_columns(tmp_path / "velocity.csv")
        assert velocity["v_m_per_s"].size == 3
        assert np.all(np.abs(velocity["v_m_per_s"] - velocity["v_true_m_per_s"]) < 5 * velocity["stat_err"])
        tpls = read_csv_columns(tmp_path / "tpls_comparison.csv")
        np.testing.assert_allclose(tpls["pulse_us"], [10.0, 40.0])
        assert (tmp_path / "adev_velocity.csv").exists()

    def test_rejects_zero_spectra(self, tmp_path):
        assert run("velocimetry", "--n-spectra", 0, "--out-dir", tmp_path) == 2


class Test_consume_campaign:
    @pytest.fixture
    def messages(self):
        logger = get_logger("CLI")
        records = []
        handler = logging.Handler()
        handler.emit = lambda record: records.append(record.getMessage())
        logger.addHandler(handler)
        logger.setLevel(logging.INFO)
        yield records
        logger.removeHandler(handler)
        logger.setLevel(logging.NOTSET)

    def test_progress_is_logged(self, rb87, messages):
        scene = StaticScene(species=rb87, atom_number=0, detection_noise=0.0, launch_phase_noise=0.0,
                            accel_floor=0.0, rotation_floor=0.0, common_mode_asd=0.0,
                            vibration=VibrationModel(rms=0.0))
        processor = CampaignStreamProcessor(4, progress_every=2)
        records = consume_campaign(processor, run_static_campaign(16.0, scene, CycleConfig()))
        assert len(records) == 4
        assert messages == ["2/4 blocks, t=4 s", "4/4 blocks, t=12 s", "campaign complete, 4 blocks"]

    def test_fringe_lost_is_logged(self, messages):
        def lost():
            raise FringeLost("pk_pv lock lost at t=3 s")
            yield

        processor = CampaignStreamProcessor(4)
        with pytest.raises(FringeLost):
            consume_campaign(processor, lost())
        assert processor.current_state == "failed"
        assert messages[0].startswith("fringe lost after 0 blocks")
