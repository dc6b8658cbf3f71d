import json
import math
import os

import pytest

from buckforge import PIGains, compensated_loop, stability_margins
from buckforge.cli import main


def run(args):
    return main(args)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


def test_derive(nominal_config_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert run(["derive", "--config", nominal_config_path, "--out-dir", str(out)]) == 0
    doc = read_json(out / "derive.json")
    assert doc["operating_point"]["duty"] == pytest.approx(0.51, abs=0.005)
    den = doc["transfer_function"]["den"]
    assert den[0] == 1.0
    assert den[1] == pytest.approx(803.333, rel=1e-3)
    assert den[2] == pytest.approx(135998.4, rel=1e-3)
    manifest = read_json(out / "derive_manifest.json")
    assert manifest["command"] == "derive"
    assert manifest["tool_version"]
    for path in manifest["outputs"]:
        assert os.path.exists(path)
    assert "duty cycle" in capsys.readouterr().out


def test_derive_zero_winding_resistance(tmp_path):
    config = {
        "vg": 30.0, "vo_target": 15.0, "r_load": 10.0, "r_l": 0.0,
        "l": 250e-6, "c": 30e-3, "fs": 60e3, "vs": 10.0, "vref": 2.0,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    out = tmp_path / "out"
    assert run(["derive", "--config", str(cfg_path), "--out-dir", str(out)]) == 0
    den = read_json(out / "derive.json")["transfer_function"]["den"]
    assert den[2] == pytest.approx(1.0 / (250e-6 * 30e-3), rel=1e-9)


def test_missing_config_is_exit_2(tmp_path, capsys):
    out = tmp_path / "out"
    assert run(["derive", "--config", str(tmp_path / "nope.json"),
                "--out-dir", str(out)]) == 2
    assert not (out / "derive.json").exists()
    assert "error" in capsys.readouterr().err


def test_bad_config_field_named(tmp_path, capsys):
    config = {"vg": 30.0, "typo_field": 1.0}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    assert run(["derive", "--config", str(cfg_path),
                "--out-dir", str(tmp_path / "out")]) == 2
    assert "typo_field" in capsys.readouterr().err


def test_bode_outputs(nominal_config_path, tmp_path):
    out = tmp_path / "out"
    code = run([
        "bode", "--config", nominal_config_path, "--out-dir", str(out),
        "--kp", "10", "--ki", "1", "--svg",
    ])
    assert code == 0
    header, rows = read_csv(out / "bode.csv")
    assert header == ["omega_rad_s", "magnitude_db", "phase_deg"]
    assert len(rows) > 100
    margins = read_json(out / "margins.json")
    assert 6.0 <= margins["phase_margin_deg"] <= 12.0
    assert math.isinf(margins["gain_margin_db"])
    assert margins["phase_crossover"] is None
    svg = (out / "bode.svg").read_text()
    assert svg.startswith("<svg")
    assert "polyline" in svg


def test_bode_rejects_zero_gains(nominal_config_path, tmp_path, capsys):
    assert run([
        "bode", "--config", nominal_config_path,
        "--out-dir", str(tmp_path / "out"), "--kp", "0", "--ki", "0",
    ]) == 2
    assert "zero" in capsys.readouterr().err


def test_bode_modulator_gain_shift(nominal_config_path, tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    run(["bode", "--config", nominal_config_path, "--out-dir", str(out_a),
         "--kp", "0.23", "--ki", "1"])
    run(["bode", "--config", nominal_config_path, "--out-dir", str(out_b),
         "--kp", "0.23", "--ki", "1", "--include-modulator-gain"])
    _, rows_a = read_csv(out_a / "bode.csv")
    _, rows_b = read_csv(out_b / "bode.csv")
    for ra, rb in zip(rows_a, rows_b):
        shift = float(rb[1]) - float(ra[1])
        assert shift == pytest.approx(-20.0, abs=1e-9)


def test_bode_reruns_byte_identical(nominal_config_path, tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        run(["bode", "--config", nominal_config_path, "--out-dir", str(out),
             "--kp", "10", "--ki", "1"])
    assert (out_a / "bode.csv").read_bytes() == (out_b / "bode.csv").read_bytes()
    assert (out_a / "margins.json").read_bytes() == (out_b / "margins.json").read_bytes()


def test_tune_round_trip(nominal_config_path, tmp_path, nominal_plant):
    target = stability_margins(
        compensated_loop(nominal_plant, PIGains(0.23, 1.0))
    ).phase_margin_deg
    out = tmp_path / "out"
    assert run([
        "tune", "--config", nominal_config_path, "--out-dir", str(out),
        "--ki", "1", "--target-pm", f"{target}",
    ]) == 0
    doc = read_json(out / "tune.json")
    assert doc["gains"]["kp"] == pytest.approx(0.23, rel=0.05)
    assert doc["achieved_margins"]["phase_margin_deg"] == pytest.approx(target, abs=0.05)
    assert doc["design_report"]["closed_loop"]["dc_gain"] == 1.0


def test_tune_target_75_notes_published_design(nominal_config_path, tmp_path):
    out = tmp_path / "out"
    assert run([
        "tune", "--config", nominal_config_path, "--out-dir", str(out),
        "--ki", "1", "--target-pm", "75",
    ]) == 0
    doc = read_json(out / "tune.json")
    # the bare loop reaches 75 deg at a much smaller kp than published
    assert doc["gains"]["kp"] < 0.15
    assert doc["published_gain_reference"]["kp"] == 0.23


def test_tune_unreachable_is_exit_3(nominal_config_path, tmp_path, capsys):
    assert run([
        "tune", "--config", nominal_config_path,
        "--out-dir", str(tmp_path / "out"), "--target-pm", "179.9",
    ]) == 3
    assert "not bracketed" in capsys.readouterr().err


def test_step_uncompensated(nominal_config_path, tmp_path):
    out = tmp_path / "out"
    assert run([
        "step", "--config", nominal_config_path, "--out-dir", str(out),
        "--uncompensated",
    ]) == 0
    metrics = read_json(out / "step_metrics.json")
    assert metrics["final_value"] == pytest.approx(0.9671, abs=1e-3)
    assert 0.006 <= metrics["settling_time"] <= 0.012
    header, rows = read_csv(out / "step.csv")
    assert header == ["time_s", "output"]
    assert len(rows) == 20001


def test_step_overshoot_grows_with_kp(nominal_config_path, tmp_path):
    outs = {}
    for kp in ("0.23", "10"):
        out = tmp_path / f"kp{kp}"
        assert run([
            "step", "--config", nominal_config_path, "--out-dir", str(out),
            "--kp", kp, "--ki", "1",
        ]) == 0
        outs[kp] = read_json(out / "step_metrics.json")
    assert outs["10"]["max_overshoot_pct"] > outs["0.23"]["max_overshoot_pct"]


def test_step_rejects_bad_window(nominal_config_path, tmp_path):
    assert run([
        "step", "--config", nominal_config_path,
        "--out-dir", str(tmp_path / "out"), "--uncompensated", "--t-end", "0",
    ]) == 2


def test_step_needs_gains_or_uncompensated(nominal_config_path, tmp_path, capsys):
    assert run([
        "step", "--config", nominal_config_path, "--out-dir", str(tmp_path / "out"),
    ]) == 2
    assert "--kp" in capsys.readouterr().err


def test_simulate_hold(nominal_config_path, tmp_path):
    out = tmp_path / "out"
    code = run([
        "simulate", "--config", nominal_config_path, "--out-dir", str(out),
        "--t-end", "0.01", "--from-operating-point",
    ])
    assert code == 0
    report = read_json(out / "regulation.json")
    assert report["passed"]
    assert report["final_vc_mean"] == pytest.approx(15.0, rel=0.02)
    assert report["gains"]["kp"] == pytest.approx(17.25, rel=1e-9)
    header, rows = read_csv(out / "sim.csv")
    assert header == ["time_s", "il_a", "vc_v", "duty", "switch_state"]
    assert rows[0][4] in ("0", "1")


def test_simulate_input_step_to_500(nominal_config_path, tmp_path):
    out = tmp_path / "out"
    code = run([
        "simulate", "--config", nominal_config_path, "--out-dir", str(out),
        "--vg", "500", "--from-operating-point", "--t-end", "0.7",
        "--steps-per-period", "50",
    ])
    assert code == 0
    report = read_json(out / "regulation.json")
    assert report["passed"]
    assert report["final_vc_mean"] == pytest.approx(15.0, rel=0.02)
    assert report["duty_final"] == pytest.approx(0.0306, abs=0.005)


def test_simulate_undervoltage_fails_regulation(nominal_config_path, tmp_path):
    out = tmp_path / "out"
    code = run([
        "simulate", "--config", nominal_config_path, "--out-dir", str(out),
        "--vg", "10", "--t-end", "0.01",
    ])
    assert code == 4
    report = read_json(out / "regulation.json")
    assert not report["passed"]
    assert report["duty_final"] == 1.0
    assert report["duty_saturated"]
    # outputs are still written on regulation failure
    assert (out / "sim.csv").exists()


def test_simulate_requires_gain_pair(nominal_config_path, tmp_path, capsys):
    assert run([
        "simulate", "--config", nominal_config_path,
        "--out-dir", str(tmp_path / "out"), "--kp", "17.25", "--t-end", "0.01",
    ]) == 2
    assert "--kp" in capsys.readouterr().err


def test_help_exits_zero():
    assert run(["--help"]) == 0


def test_unknown_command_exits_2():
    assert run(["frobnicate"]) == 2
