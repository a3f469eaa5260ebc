import csv
import json

import pytest

from holopulse import __version__
from holopulse.cli import CONFIG_SCHEMA, config_hash, main


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out-dir", str(out)])
    return code, out


def write_config(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_defaults(tmp_path, capsys):
    code, out = run(tmp_path, "simulate")
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["fidelity"] == pytest.approx(1.0, abs=1e-6)
    assert {"trace.csv", "fields.csv", "summary.json", "manifest.json"} <= {p.name for p in out.iterdir()}
    assert "fidelity" in capsys.readouterr().out


def test_simulate_hadamard_populations(tmp_path):
    code, out = run(tmp_path, "simulate", "--gate", "hadamard")
    pops = json.loads((out / "summary.json").read_text())["final_populations"]
    assert (pops["p0"], pops["p1"]) == pytest.approx((0.5, 0.5), abs=1e-6)
    last = rows(out / "trace.csv")[-1]
    assert float(last["t_us"]) == 8.0


def test_malformed_json_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, '{\n  "gate": "x",\n  "t1_us": 4,,\n}')
    code, _ = run(tmp_path, "simulate", "--config", cfg)
    assert code == 2
    err = capsys.readouterr().err
    assert "cfg.json:3:" in err


@pytest.mark.parametrize("cfg, field", [
    ({"gate": "cnot"}, "gate"),
    ({"sweep": {"points": 4.5}}, "sweep.points"),
    ({"t1_us": -1}, "t1_us"),
    ({"unknown": 1}, "<root>"),
])
def test_schema_errors_name_field(tmp_path, capsys, cfg, field):
    code, _ = run(tmp_path, "sweep", "--config", write_config(tmp_path, cfg))
    assert code == 2
    assert f"field '{field}'" in capsys.readouterr().err


def test_unconstrained_inline_coefficients_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, {"coefficients": {"values": [1, 1, 1, 1, 1, 1, 1, 1]}})
    code, _ = run(tmp_path, "simulate", "--config", cfg)
    assert code == 2
    assert "coefficients" in capsys.readouterr().err


def test_sweep_summary_and_manifest(tmp_path):
    code, out = run(tmp_path, "sweep", "--points", "61")
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["bandwidth_khz"][0] == pytest.approx(-summary["bandwidth_khz"][1])
    assert "band_410_khz" in summary and "band_600_khz" in summary
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["version"] == __version__
    assert manifest["seed"] == 0
    assert manifest["config"]["sweep"]["points"] == 61
    assert manifest["config_sha256"] == config_hash(manifest["config"])
    assert set(manifest["files"]) == {"curve.csv", "summary.json"}
    assert len(rows(out / "curve.csv")) == 61


def test_flags_override_config(tmp_path):
    cfg = write_config(tmp_path, {"gate": "x", "sweep": {"points": 41, "delta_max_khz": 200}})
    code, out = run(tmp_path, "sweep", "--config", cfg, "--gate", "z", "--points", "21")
    resolved = json.loads((out / "manifest.json").read_text())["config"]
    assert resolved["gate"] == "z"
    assert resolved["sweep"] == {"points": 21, "delta_max_khz": 200, "threshold": 0.99}


def test_reproducible_outputs(tmp_path):
    _, a = run(tmp_path, "compare", "--points", "31", name="a")
    _, b = run(tmp_path, "compare", "--points", "31", name="b")
    assert (a / "curves.csv").read_bytes() == (b / "curves.csv").read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["files"] == mb["files"] and ma["config_sha256"] == mb["config_sha256"]


def test_heatmap_outputs(tmp_path):
    cfg = write_config(tmp_path, {"heatmap": {"eta_points": 11}})
    code, out = run(tmp_path, "heatmap", "--config", cfg, "--points", "41")
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["zero_detuning_max_deviation"] < 1e-6
    assert len(rows(out / "contour.csv")) > 0
    assert len(rows(out / "map.csv")) == 11 * 41


def test_optimize_zero_band_and_coefficient_file(tmp_path):
    cfg = write_config(tmp_path, {"optimizer": {"band_khz": 0, "points": 1}})
    code, out = run(tmp_path, "optimize", "--config", cfg, "--seed", "4", name="opt")
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] and report["settings"]["seed"] == 4
    # the coefficients file feeds back in as a source
    cfg2 = write_config(tmp_path, {"coefficients": {"file": "opt/coefficients.json"}}, "c2.json")
    code, sim = run(tmp_path, "simulate", "--config", cfg2, name="sim")
    assert code == 0
    assert json.loads((sim / "summary.json").read_text())["fidelity"] == pytest.approx(1, abs=1e-6)


def test_optimize_unreachable_band_exit_0(tmp_path):
    cfg = write_config(tmp_path, {"optimizer": {"band_khz": 50000, "max_iter": 10, "restarts": 1}})
    code, out = run(tmp_path, "optimize", "--config", cfg)
    assert code == 0
    assert json.loads((out / "report.json").read_text())["converged"] is False


def test_export_awg_requires_hardware_block(tmp_path, capsys):
    code, _ = run(tmp_path, "export-awg")
    assert code == 2
    assert "awg" in capsys.readouterr().err
    cfg = write_config(tmp_path, {"awg": {"f1_mhz": 250, "f0_mhz": 150, "f10_mhz": 100,
                                          "sample_rate_msps": 250}})
    code, _ = run(tmp_path, "export-awg", "--config", cfg)
    assert code == 2


def test_export_awg_f32(tmp_path):
    cfg = write_config(tmp_path, {"awg": {"f1_mhz": 250, "f0_mhz": 150, "f10_mhz": 100,
                                          "sample_rate_msps": 600, "format": "f32"}})
    code, out = run(tmp_path, "export-awg", "--config", cfg)
    assert code == 0
    names = set(json.loads((out / "manifest.json").read_text())["files"])
    assert {"waveform.f32", "waveform.f32.json", "summary.json"} == names
    assert (out / "waveform.f32").stat().st_size == 4 * 4800


def test_no_temp_files_left(tmp_path):
    _, out = run(tmp_path, "simulate", "--gate", "z")
    assert not [p for p in out.iterdir() if p.name.endswith(".tmp")]


def test_schema_is_valid_json_schema():
    import jsonschema
    jsonschema.Draft202012Validator.check_schema(CONFIG_SCHEMA)
