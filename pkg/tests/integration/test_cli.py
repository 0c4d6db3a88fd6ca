"""End-to-end tests of the cqed-sim command line."""

import json

import numpy as np
import pytest

from cqed_sim.cli.main import EXIT_INVALID, EXIT_IO, EXIT_OK, build_parser, run
from cqed_sim.config import PresetLoader, load_config
from cqed_sim.physics.measurement import coil_field, readout_noise_profile
from cqed_sim.physics.sensitivity import evaluate_operating_point
from cqed_sim.models.measurement import CoilSpec
from cqed_sim.utils.file_io import read_csv, read_json


def write_config(tmp_path, data, name="device.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


class TestParser:
    """Test the argument surface."""

    def test_subcommands(self):
        parser = build_parser()
        args = parser.parse_args(["design-map", "cavity", "--contours", "2,10"])
        assert args.command == "design-map"
        assert args.kind == "cavity"
        assert args.format == "csv"

    def test_preset_and_config_exclusive(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["noise", "--preset", "a", "--config", "b.json"])


class TestConfigHandling:
    """Test configuration resolution and exit codes."""

    def test_dump_config_round_trips(self, tmp_path):
        out = tmp_path / "resolved.json"
        assert run(["noise", "--dump-config", "--output", str(out)]) == EXIT_OK
        assert load_config(out) == PresetLoader().load("paper-device")

    def test_paper_device_preset_by_name(self, tmp_path):
        out = tmp_path / "resolved.json"
        args = ["spectrum", "--preset", "paper-device", "--dump-config", "--output", str(out)]
        assert run(args) == EXIT_OK
        assert read_json(out)["cavity"]["kappa_c1_hz"] == pytest.approx(125e3)

    def test_seed_override(self, tmp_path):
        out = tmp_path / "resolved.json"
        assert run(["measure", "--seed", "42", "--dump-config", "--output", str(out)]) == EXIT_OK
        assert read_json(out)["measurement"]["seed"] == 42

    def test_unknown_key_is_invalid(self, tmp_path):
        config = write_config(tmp_path, {"cavity": {"Q": 1e4}})
        assert run(["noise", "--config", str(config), "--output", str(tmp_path / "n.csv")]) == EXIT_INVALID

    def test_missing_preset_is_invalid(self, tmp_path):
        assert run(["noise", "--preset", "no-such-device", "--output", str(tmp_path / "n.csv")]) == EXIT_INVALID

    def test_missing_config_file_is_io_failure(self, tmp_path):
        missing = tmp_path / "absent.json"
        assert run(["noise", "--config", str(missing), "--output", str(tmp_path / "n.csv")]) == EXIT_IO

    def test_sensitivity_without_power_is_invalid(self, tmp_path):
        config = write_config(tmp_path, {"drive": {"power_dbm": None}})
        out = tmp_path / "s.csv"
        assert run(["sensitivity", "--config", str(config), "--output", str(out)]) == EXIT_INVALID
        assert not out.exists()

    def test_bad_contour_list_is_invalid(self, tmp_path):
        out = tmp_path / "map.csv"
        assert run(["design-map", "diamond", "--contours", "2,x", "--output", str(out)]) == EXIT_INVALID


class TestSubcommands:
    """Run each subcommand on small grids."""

    def test_spectrum_coarse(self, tmp_path):
        out = tmp_path / "spectrum.csv"
        assert run(["spectrum", "--grid", "coarse", "--output", str(out)]) == EXIT_OK

        rows = read_csv(out)
        assert len(rows) == 41 * 13
        assert list(rows[0].keys()) == ["delta_hz", "delta_s_hz", "re_r", "im_r", "abs_r2"]
        center = min(rows, key=lambda r: abs(float(r["delta_hz"])) + abs(float(r["delta_s_hz"])))
        assert float(center["abs_r2"]) == pytest.approx(0.385, abs=0.005)

    def test_spectrum_json(self, tmp_path):
        out = tmp_path / "spectrum.json"
        assert run(["spectrum", "--grid", "coarse", "--format", "json", "--output", str(out)]) == EXIT_OK
        payload = read_json(out)
        assert payload["strong_coupling"] is True
        assert len(payload["rows"]) == 533

    def test_nonlinear_map_coarse(self, tmp_path):
        out = tmp_path / "map.csv"
        args = ["nonlinear-map", "--grid", "coarse", "--power-dbm", "-25", "--threads", "2", "--output", str(out)]
        assert run(args) == EXIT_OK

        rows = read_csv(out)
        assert len(rows) == 533
        assert list(rows[0].keys()) == [
            "power_dbm",
            "delta_hz",
            "delta_s_hz",
            "alpha_sq",
            "chi",
            "c_alpha",
            "re_r",
            "im_r",
            "branch",
            "abs_r2",
        ]
        assert {float(r["power_dbm"]) for r in rows} == {-25.0}
        assert {r["branch"] for r in rows} == {"lower"}
        assert all(float(r["c_alpha"]) >= 0.0 for r in rows)
        assert all(float(r["chi"]) >= 1.0 for r in rows)

    def test_noise(self, tmp_path):
        out = tmp_path / "noise.csv"
        assert run(["noise", "--output", str(out)]) == EXIT_OK

        row = read_csv(out)[0]
        assert float(row["power_dbm"]) == -18.0
        parts = [k for k in row if k.startswith("psd_v2hz_") and k != "psd_v2hz_total"]
        assert len(parts) == 5
        assert sum(float(row[k]) for k in parts) == pytest.approx(float(row["psd_v2hz_total"]), rel=1e-9)
        fractions = sum(float(row[k]) for k in ("fraction_port", "fraction_cavity", "fraction_spin"))
        assert fractions == pytest.approx(1.0, rel=1e-12)
        assert float(row["cooling_db"]) > 0

    def test_sensitivity_csv_is_eta_over_frequency(self, tmp_path):
        out = tmp_path / "sensitivity.csv"
        assert run(["sensitivity", "--output", str(out)]) == EXIT_OK

        rows = read_csv(out)
        assert len(rows) == 101
        assert list(rows[0].keys())[:2] == ["f_hz", "eta_t_sqrthz"]
        assert float(rows[0]["f_hz"]) == pytest.approx(1.0)
        assert float(rows[-1]["f_hz"]) == pytest.approx(1e5)

        summary = read_json(tmp_path / "sensitivity.summary.json")
        assert summary["optimal_power_dbm"] == -18.0
        assert summary["optimized"] is False
        assert "power_dbm" not in summary

    def test_sensitivity_json_keys(self, tmp_path):
        out = tmp_path / "sensitivity.json"
        assert run(["sensitivity", "--format", "json", "--output", str(out)]) == EXIT_OK

        payload = read_json(out)
        assert "broadband" not in payload
        for key in ("optimal_power_dbm", "eta_ft_sqrthz", "cooling_db", "reference_eta_ft_sqrthz", "chi"):
            assert key in payload

    def test_sensitivity_broadband(self, tmp_path):
        out = tmp_path / "sensitivity.json"
        args = ["sensitivity", "--broadband", "--format", "json", "--output", str(out)]
        assert run(args) == EXIT_OK

        payload = read_json(out)
        assert payload["eta_ft_sqrthz"] == pytest.approx(payload["eta_t_sqrthz"] * 1e15)
        assert payload["relative_improvement"] < 0
        assert payload["saturation_power_dbm"] == pytest.approx(-19.26, abs=0.02)
        assert len(payload["broadband"]) == 101
        assert all(p["eta_t_sqrthz"] >= p["eta_instrument"] for p in payload["broadband"])

    @pytest.mark.slow
    def test_optimal_diamond_sensitivity(self, tmp_path):
        out = tmp_path / "optimal.json"
        args = ["sensitivity", "--preset", "optimal-diamond", "--optimize", "--format", "json", "--output", str(out)]
        assert run(args) == EXIT_OK

        payload = read_json(out)
        assert 80.0 < payload["eta_ft_sqrthz"] < 100.0
        assert payload["bistable"] is True

    def test_measure_recovers_coil_field(self, tmp_path):
        config = write_config(
            tmp_path,
            {
                "measurement": {
                    "waveform": {"kind": "sine", "frequency_hz": 10.0},
                    "duration_s": 10.0,
                    "fs_hz": 20000.0,
                    "seed": 1,
                    "coil": {},
                    "references_t": {"coil_formula": 4.3e-6},
                }
            },
        )
        out = tmp_path / "psd.csv"
        assert run(["measure", "--config", str(config), "--output", str(out)]) == EXIT_OK

        recovery = read_json(tmp_path / "psd_recovery.json")
        applied = coil_field(CoilSpec())
        assert recovery["applied_t"] == pytest.approx(applied)
        assert recovery["amplitude_t"] == pytest.approx(applied, rel=0.02)
        assert recovery["low_snr"] is False
        assert recovery["reference_errors"]["coil_formula"] < 0.02

        trace = np.load(tmp_path / "psd_trace.npy")
        assert trace.size == 200_000
        assert len(read_csv(out)) > 0

    def test_measure_noise_follows_readout_profile(self, tmp_path):
        config = write_config(
            tmp_path,
            {
                "measurement": {
                    "waveform": {"kind": "sine", "frequency_hz": 10.0},
                    "duration_s": 10.0,
                    "fs_hz": 20000.0,
                    "seed": 3,
                }
            },
        )
        out = tmp_path / "psd.csv"
        assert run(["measure", "--config", str(config), "--output", str(out)]) == EXIT_OK

        resolved = load_config(config)
        cav, spins, env = resolved.cavity_params(), resolved.spin_params(), resolved.environment()
        op = evaluate_operating_point(cav, spins, env, resolved.drive.power_dbm)
        profile = readout_noise_profile(cav, spins, env, op, f_max=10000.0)

        rows = [r for r in read_csv(out) if 150.0 <= float(r["f_hz"]) <= 900.0]
        f = np.array([float(r["f_hz"]) for r in rows])
        measured = np.array([float(r["psd_v2hz"]) for r in rows])
        assert np.mean(measured / profile(f)) == pytest.approx(1.0, rel=0.1)
        # Source phase noise lifts the low-offset floor well above the flat analysis-offset level
        assert np.median(measured) > 5.0 * op.noise

    def test_simulate_trajectory(self, tmp_path):
        config = write_config(
            tmp_path, {"integrator": {"n_bins": 1, "n_samples": 20}, "sweep": {"t_end_s": 5e-5}}
        )
        out = tmp_path / "trajectory.json"
        args = ["simulate", "--config", str(config), "--format", "json", "--output", str(out)]
        assert run(args) == EXIT_OK

        payload = read_json(out)
        assert payload["steps"] > 0
        assert payload["rows"][0]["alpha_sq"] == 0.0
        assert 0 < payload["rows"][-1]["t_s"] <= 5e-5 * (1 + 1e-9)

    def test_design_map_diamond(self, tmp_path):
        config = write_config(
            tmp_path,
            {"design": {"rho_range_ppm": [1.0, 10.0], "vd_range_cm3": [1e-3, 0.1], "points": [2, 2]}},
        )
        out = tmp_path / "diamond.csv"
        args = ["design-map", "diamond", "--config", str(config), "--contours", "100,1000", "--output", str(out)]
        assert run(args) == EXIT_OK

        rows = read_csv(out)
        assert len(rows) == 4
        assert list(rows[0].keys())[:3] == ["rho_ppm", "vd_cm3", "eta_t_sqrthz"]
        contours = read_json(tmp_path / "diamond.contours.json")
        assert contours["levels_ft_sqrthz"] == [100.0, 1000.0]
        assert set(contours["contours"]) == {"100", "1000"}
