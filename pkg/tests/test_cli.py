import json
import os
from pathlib import Path

import pytest
import yaml

from dualpair import cli
from dualpair.config import DEFAULTS, ConfigError, env_overrides, load_config

GOLDEN = Path(__file__).parent / "golden" / "all_grid16.json"


def write_yaml(tmp_path, data, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


# ----------------------------------------------------------------- config


def test_defaults_validate():
    cfg = load_config()
    assert cfg.grid == 32
    assert cfg.mode == "diagnostic"
    assert cfg.geometry.k0 == 2
    assert cfg.threads >= 1


@pytest.mark.parametrize(
    "data, path",
    [
        ({"geometry": {"grid": 24}}, "geometry.grid"),
        ({"geometry": {"colour": 1}}, "geometry.colour"),
        ({"params": {"zeta": 1}}, "params.zeta"),
        ({"execution": {"mode": "fast"}}, "execution.mode"),
        ({"execution": {"mode": "theorem"}}, "geometry.chi"),
        ({"execution": {"threads": -1}}, "execution.threads"),
        ({"geometry": {"x0": [0.0]}}, "geometry.x0"),
        ({"geometry": {"beta": 0.6}}, "geometry"),
        ({"functions": []}, "functions"),
        ({"functions": ["bump"]}, "functions[0]"),
        ({"coefficient": {"kind": "wavy"}}, "coefficient.kind"),
        ({"output": {"formats": ["xml"]}}, "output.formats"),
        ({"schema": 2}, "schema"),
        ({"geometry": 3}, "geometry"),
    ],
)
def test_config_errors_carry_field_paths(tmp_path, data, path):
    with pytest.raises(ConfigError) as info:
        load_config(write_yaml(tmp_path, data))
    assert info.value.path == path


def test_theorem_mode_with_faithful_geometry_loads(tmp_path):
    cfg = load_config(write_yaml(tmp_path, {"execution": {"mode": "theorem"}, "geometry": {"chi": None}}))
    assert cfg.geometry.faithful


def test_partial_params_merge(tmp_path):
    cfg = load_config(write_yaml(tmp_path, {"params": {"eps": 0.05}}))
    assert cfg.params.eps == 0.05
    assert cfg.params.s == DEFAULTS["params"]["s"]


def test_env_overrides():
    env = {"DUALPAIR_GRID": "16", "DUALPAIR_MODE": "theorem", "DUALPAIR_SEED": "4", "DUALPAIR_OUT": "x"}
    out = env_overrides(env)
    assert out == {"geometry.grid": 16, "execution.mode": "theorem", "execution.seed": 4, "output.dir": "x"}
    with pytest.raises(ConfigError) as info:
        env_overrides({"DUALPAIR_GRID": "many"})
    assert info.value.path == "DUALPAIR_GRID"


def test_overrides_beat_file(tmp_path):
    cfg = load_config(write_yaml(tmp_path, {"geometry": {"grid": 64}}), {"geometry.grid": 16})
    assert cfg.grid == 16


# -------------------------------------------------------------------- cli


def run_cli(*args):
    return cli.main(list(args))


def test_clean_rounds_and_encodes():
    out = cli.clean({"a": 1 / 3, "b": float("inf"), "c": float("nan"), "d": (1, True), 2: None})
    assert out == {"a": 0.333333333333, "b": "inf", "c": "nan", "d": [1, True], "2": None}


def test_exponents_report(tmp_path):
    assert run_cli("exponents", "--out", str(tmp_path)) == 0
    doc = json.loads((tmp_path / "exponents.json").read_text())
    ex = doc["summary"]["exponents"]
    assert round(ex["eta"], 6) == 1.294118
    assert round(ex["gamma"], 6) == 1.294118
    assert round(ex["theta"], 6) == 0.227273
    assert doc["passed"] and doc["schema"] == 1
    assert (tmp_path / "exponents_checks.csv").exists()


def test_decompose_constant_function(tmp_path):
    cfg = write_yaml(tmp_path, {"functions": [{"name": "constant", "c": 2.0}], "geometry": {"grid": 16}})
    out = tmp_path / "out"
    assert run_cli("decompose", "--config", cfg, "--out", str(out)) == 0
    doc = json.loads((out / "decompose.json").read_text())
    assert doc["passed"]
    lines = (out / "decompose_lambda.csv").read_text().splitlines()
    header = lines[0].split(",")
    for line in lines[1:]:
        row = dict(zip(header, line.split(",")))
        assert row["balls"] == "0"
        assert row["H_lambda"] == "0"
    assert (out / "decompose_balls.csv").read_text().strip() == "empty"


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_yaml(tmp_path, {"geometry": {"grid": 24}})
    assert run_cli("exponents", "--config", cfg, "--out", str(tmp_path)) == 2
    assert "geometry.grid" in capsys.readouterr().err


def test_resolvability_exit_code(tmp_path, capsys):
    cfg = write_yaml(tmp_path, {"geometry": {"chi": None, "grid": 16}})
    assert run_cli("decompose", "--config", cfg, "--out", str(tmp_path)) == 3
    assert "resolvability" in capsys.readouterr().err


def test_failing_check_gives_exit_one(tmp_path):
    # at 16 cells per axis the two energy quadratures drift apart by more than 2%
    cfg = write_yaml(tmp_path, {"geometry": {"grid": 16}, "functions": [{"name": "trig-random", "seed": 0}]})
    assert run_cli("energy", "--config", cfg, "--out", str(tmp_path)) == 1
    doc = json.loads((tmp_path / "energy.json").read_text())
    assert not doc["passed"]
    assert doc["failed"]


def test_env_config_path(tmp_path, monkeypatch):
    cfg = write_yaml(tmp_path, {"output": {"formats": ["json"]}})
    monkeypatch.setenv("DUALPAIR_CONFIG", cfg)
    monkeypatch.setenv("DUALPAIR_OUT", str(tmp_path / "envout"))
    assert run_cli("exponents") == 0
    assert sorted(os.listdir(tmp_path / "envout")) == ["exponents.json"]


def compare(a, b, path="$"):
    if isinstance(a, dict):
        assert isinstance(b, dict) and sorted(a) == sorted(b), path
        for k in a:
            compare(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert isinstance(b, list) and len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            compare(x, y, f"{path}[{i}]")
    elif isinstance(a, float) and not isinstance(b, bool):
        assert b == pytest.approx(a, rel=1e-9, abs=1e-300), path
    else:
        assert a == b, path


@pytest.mark.slow
def test_golden_report_grid16(tmp_path):
    code = run_cli("all", "--grid", "16", "--out", str(tmp_path), "--threads", "2")
    doc = json.loads((tmp_path / "all.json").read_text())
    golden = json.loads(GOLDEN.read_text())
    compare(golden, doc)
    assert code == (0 if golden["passed"] else 1)
