from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

from rydberg_cz.cli import main
from rydberg_cz.config import ConfigParseError, ConfigValidationError, load_config, validate
from rydberg_cz.core import TABLE1_INITIAL, TABLE2_REPRODUCED

GOLDEN = Path(__file__).parent / "golden"
sys.path.insert(0, str(GOLDEN))
from regenerate import CASES, generate  # noqa: E402

VOLATILE = ("runtime_s", "provenance")


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return path


def test_empty_file(tmp_path):
    with pytest.raises(ConfigParseError, match="empty"):
        load_config(write(tmp_path, ""))


def test_bad_json(tmp_path):
    with pytest.raises(ConfigParseError, match="line 1"):
        load_config(write(tmp_path, "{scenario: table1}"))


def test_top_level_not_object(tmp_path):
    with pytest.raises(ConfigParseError):
        load_config(write(tmp_path, "[1, 2]"))


def test_minimal_table1_defaults(tmp_path):
    cfg = load_config(write(tmp_path, {"scenario": "table1"}))
    assert cfg.params == TABLE1_INITIAL
    assert cfg.dt == 1e-4 and cfg.seed == 0 and cfg.output_dir == "out"
    assert cfg.active == ("omega0", "omegaB", "delta_big")
    assert not cfg.bounded


def test_motional_defaults_use_reproduced_gate():
    assert validate({"scenario": "temperature-sweep"}).params == TABLE2_REPRODUCED


def test_bound_violation_names_bound(tmp_path):
    with pytest.raises(ConfigValidationError) as info:
        load_config(write(tmp_path, {"scenario": "table2", "params": {"omega0": 450}}))
    assert info.value.field == "params.omega0"
    assert "400" in str(info.value)


@pytest.mark.parametrize(
    "raw, field",
    [
        ({"scenario": "table1", "colour": 1}, "colour"),
        ({"scenario": "nope"}, "scenario"),
        ({}, "scenario"),
        ({"scenario": "table1", "params": {"omega0": "fast"}}, "params.omega0"),
        ({"scenario": "table1", "params": {"wobble": 1}}, "params.wobble"),
        ({"scenario": "table1", "dt": -1}, "dt"),
        ({"scenario": "table1", "seed": -3}, "seed"),
        ({"scenario": "table1", "seed": 1.5}, "seed"),
        ({"scenario": "table1", "model": "exact"}, "model"),
        ({"scenario": "motional-map", "grid": 1}, "grid"),
        ({"scenario": "temperature-sweep", "temperatures": [5, 10]}, "temperatures"),
        ({"scenario": "table1", "bounds": {"omega0": [5, 1]}}, "bounds"),
        ({"scenario": "table2", "gate": "table1"}, "gate"),
        ({"scenario": "table1", "active": ["omega9"]}, "active"),
    ],
)
def test_validation_errors(raw, field):
    with pytest.raises(ConfigValidationError) as info:
        validate(raw)
    assert info.value.field == field


def test_cli_overrides_win(tmp_path):
    cfg = load_config(write(tmp_path, {"scenario": "table1", "seed": 3}), {"seed": 9, "dt": None})
    assert cfg.seed == 9 and cfg.dt == 1e-4


def test_exit_config_error(tmp_path, capsys):
    assert main(["--config", str(write(tmp_path, "{"))]) == 2
    assert "config error" in capsys.readouterr().err
    assert main([]) == 2


def test_exit_physics_error(tmp_path, capsys):
    cfg = write(tmp_path, {"scenario": "temperature-sweep", "temperatures": [10, 10, 10], "samples": 5})
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "DegenerateFitError" in capsys.readouterr().err


def test_exit_not_converged_still_writes(tmp_path):
    out = tmp_path / "t1"
    assert main(["--scenario", "table1", "--max-iters", "1", "--out", str(out)]) == 4
    summary = json.loads((out / "summary.json").read_text())
    assert summary["optimiser_status"] == "budget" and summary["converged"] is False
    assert {"trace.csv", "trace.jsonl", "populations.csv", "provenance.json"} <= {p.name for p in out.iterdir()}


def test_provenance_records_inputs(tmp_path):
    out = tmp_path / "c"
    assert main(["--scenario", "convergence", "--out", str(out), "--seed", "5"]) == 0
    prov = json.loads((out / "provenance.json").read_text())
    assert prov["seed"] == 5 and prov["inputs"]["scenario"] == "convergence"
    assert {"numpy", "scipy", "python", "version"} <= set(prov)
    summary = json.loads((out / "summary.json").read_text())
    assert min(summary["observed_orders"]) > 1.9


def test_temperature_sweep_byte_identical(tmp_path):
    args = ["--scenario", "temperature-sweep", "--samples", "200", "--seed", "7"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    name = "temperature_sweep.csv"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def _strip(summary: dict) -> dict:
    return {k: v for k, v in summary.items() if k not in VOLATILE}


@pytest.mark.parametrize("case", sorted(CASES))
def test_golden(case, tmp_path):
    expected = GOLDEN / case
    if not expected.exists():
        pytest.skip("golden files missing; run tests/golden/regenerate.py")
    generate(case, tmp_path)
    produced = sorted(p.name for p in tmp_path.iterdir())
    assert produced == sorted(p.name for p in expected.iterdir())
    for name in produced:
        if name == "provenance.json":
            continue
        if name == "summary.json":
            got = _strip(json.loads((tmp_path / name).read_text()))
            want = _strip(json.loads((expected / name).read_text()))
            assert got == want
        else:
            assert (tmp_path / name).read_bytes() == (expected / name).read_bytes(), name
