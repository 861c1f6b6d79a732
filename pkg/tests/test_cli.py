import json

import numpy as np
import pytest

from mmqst.cli import (apply_overrides, build_scenario, load_config, main,
                       scenario_to_config)

FAST_CONFIG = """\
[scenario]
case = "midpoint"
modes_per_side = 3

[grid]
dt = 0.004
t_f_max = 8.0

[pulse]
kind = "offset_sine"
g_over_fsr = 0.4

[synthesis]
refine = 2
"""


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(FAST_CONFIG, encoding="utf-8")
    return path


def test_synth_writes_artifacts(config_path, tmp_path):
    out = tmp_path / "out"
    assert main(["synth", "--config", str(config_path), "--out", str(out)]) == 0
    for name in ("pulses.csv", "trace.csv", "launch.csv", "synth_report.json"):
        assert (out / name).is_file()
    lines = (out / "pulses.csv").read_text().splitlines()
    assert lines[0].startswith("# schema: mmqst.pulses")
    assert lines[1] == "t,re_ga,im_ga,re_gb_tilde,im_gb_tilde"
    meta = json.loads((out / "synth_report.json").read_text())
    assert meta["t_f"] > 0
    assert meta["alpha_tf_sq"] < 1e-8


def test_validate_requires_pulses(config_path, tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    code = main(["validate", "--config", str(config_path), "--out", str(out)])
    assert code == 1


def test_synth_then_validate(config_path, tmp_path):
    out = tmp_path / "out"
    assert main(["synth", "--config", str(config_path), "--out", str(out)]) == 0
    assert main(["validate", "--config", str(config_path), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["final_infidelity"] < 1e-4
    assert report["discrepancy_alpha"] < 1e-3
    assert report["E_consistency_rel"] < 1e-4
    assert (out / "trajectory.csv").is_file()


def test_invalid_grid_step_names_constraint(config_path, tmp_path, capsys):
    code = main(["synth", "--config", str(config_path),
                 "--out", str(tmp_path / "x"), "--override", "grid.dt=0.003"])
    assert code == 1
    assert "integer multiple" in capsys.readouterr().err


def test_zero_pulse_refused(config_path, tmp_path):
    code = main(["synth", "--config", str(config_path),
                 "--out", str(tmp_path / "x"),
                 "--override", "pulse.g_over_fsr=0.0"])
    assert code == 2


def test_missing_config_is_config_error(tmp_path):
    assert main(["synth", "--config", str(tmp_path / "nope.toml"),
                 "--out", str(tmp_path / "x")]) == 1


def test_sweep_rows_and_failures(config_path, tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", str(config_path), "--out", str(out),
                 "--override", "sweep.g_over_fsr=[0.35,0.4]"])
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 4   # schema + header + two rows
    assert lines[1].split(",")[0] == "g_over_fsr"
    assert all(row.endswith("ok") for row in lines[2:])


def test_sweep_empty_grid_rejected(config_path, tmp_path):
    code = main(["sweep", "--config", str(config_path),
                 "--out", str(tmp_path / "x"),
                 "--override", "sweep.g_over_fsr=[]"])
    assert code == 1


def test_sweep_partial_failure_recorded(config_path, tmp_path):
    out = tmp_path / "sweep"
    # 0.05 cannot empty the sender within t_f_max = 8: row fails, run goes on
    code = main(["sweep", "--config", str(config_path), "--out", str(out),
                 "--override", "sweep.g_over_fsr=[0.05,0.4]"])
    assert code == 0
    rows = (out / "sweep.csv").read_text().splitlines()[2:]
    statuses = [row.split(",")[-1] for row in rows]
    assert statuses[0].startswith("failed") and statuses[1] == "ok"


def test_poles_command(config_path, tmp_path):
    out = tmp_path / "poles"
    code = main(["poles", "--config", str(config_path), "--out", str(out),
                 "--override", "poles.g_over_fsr=[0.3]",
                 "--override", "poles.single_qubit=true"])
    assert code == 0
    body = [ln for ln in (out / "poles.csv").read_text().splitlines()[2:]]
    assert body and all(float(ln.split(",")[1]) < 0 for ln in body)
    sq = (out / "single_qubit_poles.csv").read_text().splitlines()[2:]
    assert len(sq) == 7   # six modes -> seven real roots


def test_poles_empty_box_warns_and_succeeds(config_path, tmp_path, capsys):
    out = tmp_path / "poles"
    code = main(["poles", "--config", str(config_path), "--out", str(out),
                 "--override", "poles.g_over_fsr=[0.3]",
                 "--override", "poles.re_min=0.05",
                 "--override", "poles.re_max=0.4",
                 "--override", "poles.im_min=-0.2",
                 "--override", "poles.im_max=0.2"])
    assert code == 0
    assert "no poles" in capsys.readouterr().out
    assert len((out / "poles.csv").read_text().splitlines()) == 2


def test_noise_leakage_command(config_path, tmp_path):
    out = tmp_path / "leak"
    code = main(["noise", "leakage", "--config", str(config_path),
                 "--out", str(out),
                 "--override", "noise.leakage_er_grid=[0.005,0.01]"])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["r_squared"] > 0.99
    assert (out / "noise_leakage.csv").is_file()


def test_noise_loss_command(config_path, tmp_path):
    out = tmp_path / "loss"
    code = main(["noise", "loss", "--config", str(config_path),
                 "--out", str(out),
                 "--override", "noise.kappa_over_fsr_grid=[0.001]",
                 "--override", "noise.gamma_over_fsr_grid=[0.0]"])
    assert code == 0
    lines = (out / "noise_loss.csv").read_text().splitlines()
    assert len(lines) == 3


def test_noise_thermal_command(config_path, tmp_path):
    out = tmp_path / "thermal"
    code = main(["noise", "thermal", "--config", str(config_path),
                 "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["unitarity_defect"] < 1e-8
    assert report["coefficient_match"] < 1e-12


def test_byte_identical_reruns(config_path, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["synth", "--config", str(config_path),
                     "--out", str(out)]) == 0
    for name in ("pulses.csv", "trace.csv", "launch.csv", "synth_report.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_overrides_parse_types(config_path):
    cfg = load_config(config_path)
    apply_overrides(cfg, ["pulse.g_over_fsr=0.25", "synthesis.refine=4",
                          "poles.single_qubit=true", "sweep.g_over_fsr=[0.1]"])
    assert cfg["pulse"]["g_over_fsr"] == 0.25
    assert cfg["synthesis"]["refine"] == 4
    assert cfg["poles"]["single_qubit"] is True
    assert cfg["sweep"]["g_over_fsr"] == [0.1]


def test_scenario_roundtrip(config_path):
    scenario = build_scenario(load_config(config_path))
    cfg = scenario_to_config(scenario)
    again = build_scenario(cfg)
    assert np.array_equal(again.channel.delta, scenario.channel.delta)
    assert again.grid == scenario.grid
    assert again.ga_params == scenario.ga_params


def test_validate_with_loss_override(config_path, tmp_path):
    out = tmp_path / "out"
    assert main(["synth", "--config", str(config_path), "--out", str(out)]) == 0
    code = main(["validate", "--config", str(config_path), "--out", str(out),
                 "--override", "noise.kappa_over_fsr=0.001"])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert "inefficiency_min" in report and "loss_estimate" in report
    assert report["loss_estimate"] > 0
