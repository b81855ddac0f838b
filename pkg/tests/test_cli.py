import json
import math
from pathlib import Path

import pytest

from oscillab import io
from oscillab.cli import EXIT_CONFIG, EXIT_OK, EXIT_SUITE, main
from oscillab.potentials import PotentialSpec

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def test_overlap_rows_follow_table_order(tmp_path):
    code, out = run(tmp_path, "o", "--command", "overlap", "--param", "ell=2", "--param", "d=3",
                    "--param", "window=[2,40]", "--param", "k_max=4")
    assert code == EXIT_OK
    header, rows = io.read_csv(out / "overlap.csv")
    assert header == ["s", "t", "k", "value", "provenance"]
    keys = [tuple(int(x) for x in r[:3]) for r in rows]
    assert keys == sorted(keys)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["artifacts"] == ["overlap.csv"]
    assert set(manifest["versions"]) >= {"numpy", "scipy", "python"}


def test_rerun_is_byte_identical(tmp_path):
    cfg = str(CONFIGS / "nodal.json")
    _, a = run(tmp_path, "a", "--config", cfg, "--param", "n=[50]")
    _, b = run(tmp_path, "b", "--config", cfg, "--param", "n=[50]")
    assert (a / "nodal.csv").read_bytes() == (b / "nodal.csv").read_bytes()
    assert b"\r" not in (a / "nodal.csv").read_bytes()
    assert json.loads((a / "manifest.json").read_text())["seed"] == 3


def test_floats_round_trip(tmp_path):
    code, out = run(tmp_path, "s", "--config", str(CONFIGS / "series.json"))
    assert code == EXIT_OK
    header, rows = io.read_csv(out / "energies.csv")
    doc = json.loads((out / "series.json").read_text())
    assert len(doc["mu"]) == doc["J"] == 6
    for row in rows:
        e_series, e_oracle = float(row[3]), float(row[4])
        assert io.format_value(e_series) == row[3]
        assert abs(e_series - e_oracle) < 1e-8


def test_seed_changes_random_sweep(tmp_path):
    cfg = str(CONFIGS / "nodal.json")
    _, a = run(tmp_path, "a", "--config", cfg, "--param", "n=[50]", "--param", "d=3", "--seed", "1")
    _, b = run(tmp_path, "b", "--config", cfg, "--param", "n=[50]", "--param", "d=3", "--seed", "2")
    assert (a / "nodal.csv").read_bytes() != (b / "nodal.csv").read_bytes()


def test_nodal_combo_from_parameters(tmp_path):
    combo = {"d": 2, "terms": [{"ell": 3, "m": "cos", "a": 1.0}, {"ell": 5, "m": "cos", "a": 0.5}]}
    code, out = run(tmp_path, "c", "--command", "nodal", "--param", "combo=" + json.dumps(combo))
    assert code == EXIT_OK
    doc = json.loads((out / "nodal_combo.json").read_text())
    assert doc["measure_raw"] <= 10


@pytest.mark.parametrize("command", ["spectrum", "theorem1", "lemmas", "window", "growth"])
def test_commands_write_their_artifacts(tmp_path, command):
    # growth needs a bounded potential; the rational one serves every command
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"potential": str(CONFIGS / "rational_decay.json"),
                               "parameters": {"n": 12, "N": [20], "k_max": 3, "eps": 0.05}}))
    code, out = run(tmp_path, command, "--config", str(cfg), "--command", command)
    assert code == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    for name in manifest["artifacts"]:
        assert (out / name).stat().st_size > 0


def test_flag_overrides_config_command(tmp_path):
    code, out = run(tmp_path, "w", "--config", str(CONFIGS / "series.json"), "--command", "window",
                    "--param", "n=[20]", "--param", "gamma=[0]", "--param", "eps=0.05")
    assert code == EXIT_OK
    assert (out / "window.csv").exists()


def test_list_where_number_expected(tmp_path):
    code, out = run(tmp_path, "w", "--config", str(CONFIGS / "series.json"), "--command", "window")
    assert code == EXIT_CONFIG
    assert "eps" in json.loads((out / "error.json").read_text())["message"]


def test_missing_potential_is_config_error(tmp_path, capsys):
    code, out = run(tmp_path, "e", "--command", "series", "--param", "n=10")
    assert code == EXIT_CONFIG
    report = json.loads((out / "error.json").read_text())
    assert report["error"] == "ConfigError"
    assert json.loads(capsys.readouterr().err)["exit_code"] == EXIT_CONFIG


def test_invalid_mode_reports_module(tmp_path):
    code, out = run(tmp_path, "e", "--config", str(CONFIGS / "series.json"), "--param", "ell=41")
    assert code == EXIT_CONFIG
    assert json.loads((out / "error.json").read_text())["module"] == "oscillab.laguerre"


def test_malformed_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"command": "series", "colour": "blue"}))
    assert run(tmp_path, "e", "--config", str(bad))[0] == EXIT_CONFIG
    bad.write_text("{not json")
    assert run(tmp_path, "e", "--config", str(bad))[0] == EXIT_CONFIG
    with pytest.raises(SystemExit) as info:
        main(["--command", "nope"])
    assert info.value.code == 2


def test_potential_path_resolves_relative_to_config(tmp_path):
    io.write_json(tmp_path / "v.json", PotentialSpec.quadratic(-0.00125, 0.05).to_json())
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "theorem1", "potential": "v.json",
                               "parameters": {"n": 20, "ells": [0, 10], "eps": 0.05}}))
    code, out = run(tmp_path, "t", "--config", str(cfg))
    assert code == EXIT_OK
    _, rows = io.read_csv(out / "residuals.csv")
    assert [r[1] for r in rows] == ["0", "10"]


def test_verify_all_lists_suites(tmp_path, monkeypatch):
    monkeypatch.setenv("OSCILLAB_THREADS", "1")
    code, out = run(tmp_path, "v", "--config", str(CONFIGS / "seed.json"), "--param", "criteria=[2,4]")
    assert code == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert [s["number"] for s in manifest["suites"]] == [2, 4]
    assert manifest["suite_passed"] is True and manifest["threads"] == 1


def test_verify_all_failure_exit_code(tmp_path):
    code, out = run(tmp_path, "v", "--command", "verify-all", "--param", "criteria=[5]")
    assert code == EXIT_SUITE
    assert json.loads((out / "manifest.json").read_text())["suite_passed"] is False


def test_format_value():
    assert io.format_value(0.1) == "0.10000000000000001"
    assert io.format_value(True) == "true"
    assert io.format_value(math.nan) == "nan"
    assert float(io.format_value(1 / 3)) == 1 / 3
