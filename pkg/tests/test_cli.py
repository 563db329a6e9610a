import csv
import json

import pytest

from henonlab.cli import ExperimentConfig, Output, auto_schedule, load_config, main, run
from henonlab.errors import ConfigError


def _cfg(tmp_path, **over):
    data = {"output_dir": str(tmp_path / "out")}
    data.update(over)
    return ExperimentConfig.from_dict(data)


def test_fixed_point_output_is_byte_stable(tmp_path):
    cfg = _cfg(tmp_path, fixed_point={"degree": 20})
    code, checks = run("fixed-point", cfg)
    assert code == 0 and all(checks.values())
    first = (tmp_path / "out" / "fixed_point.json").read_bytes()
    run("fixed-point", cfg)
    assert (tmp_path / "out" / "fixed_point.json").read_bytes() == first


@pytest.mark.parametrize("over", [
    {"fixed_point": {"degree": 9}},
    {"family": {"b_grid": []}},
    {"family": {"b_grid": [0.7]}},
    {"overlap": {"schedule": [[1, 4]]}},
    {"overlap": {"schedule": [[3, 3]]}},
    {"colour": "red"},
    {"cover": {"stagez": 2}},
    {"workers": 0},
])
def test_bad_configs_rejected(tmp_path, over):
    with pytest.raises(ConfigError):
        _cfg(tmp_path, **over)


def test_main_reports_config_errors(tmp_path, capsys):
    assert main(["fixed-point", "--out", str(tmp_path), "--set", "fixed_point.degree=5"]) == 2
    assert "degree" in capsys.readouterr().err


def test_overrides_and_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"seed": 3, "family": {"depth": 2}}))
    cfg = load_config(str(p), ["family.depth=3", "family.shape=y"], out=str(tmp_path / "o"))
    assert cfg.seed == 3 and cfg.family.depth == 3 and cfg.output_dir == str(tmp_path / "o")


def test_hash_ignores_output_location(tmp_path):
    a = _cfg(tmp_path / "a")
    b = _cfg(tmp_path / "b", workers=4)
    assert a.hash() == b.hash()
    assert a.hash() != _cfg(tmp_path, seed=1).hash()


def test_writes_are_confined(tmp_path):
    out = Output(_cfg(tmp_path))
    with pytest.raises(ConfigError):
        out.path("../escape.json")
    with pytest.raises(ConfigError):
        out.path(str(tmp_path / "elsewhere.json"))


def test_csv_rows_carry_config_hash(tmp_path):
    cfg = _cfg(tmp_path)
    out = Output(cfg)
    out.csv("t.csv", [{"x": 1.5}, {"x": 2.0, "y": "a"}])
    rows = list(csv.DictReader((tmp_path / "out" / "t.csv").open()))
    assert [r["config_hash"] for r in rows] == [cfg.hash()] * 2
    assert rows[1]["y"] == "a" and rows[0]["y"] == ""


def test_overlapping_cover_run(tmp_path):
    cfg = _cfg(tmp_path, cover={"A0": 1.0, "A1": 2.0, "sigma": 0.6, "mc_samples": 2000,
                                "membership_samples": 20})
    code, checks = run("cover", cfg)
    assert code == 0
    assert checks["trivial_stage"] and checks["membership_hits_satisfy_window"]
    cover = json.loads((tmp_path / "out" / "cover.json").read_text())
    assert cover["regime"] == "overlapping"


def test_disjoint_cover_run(tmp_path):
    cfg = _cfg(tmp_path, cover={"A0": 1.75285, "A1": 1.90614, "sigma": 0.39954, "stages": 2,
                                "mc_samples": 20000, "membership_samples": 50})
    code, checks = run("cover", cfg)
    assert code == 0, checks
    manifest = json.loads((tmp_path / "out" / "manifest_cover.json").read_text())
    assert manifest["config_hash"] == cfg.hash() and set(manifest["files"]) >= {"cover.json", "cover_ledger.csv"}


def test_family_sweep_b_matches_grid(tmp_path):
    cfg = _cfg(tmp_path, family={"b_grid": [0.01, 0.1], "depth": 2})
    code, checks = run("family-sweep", cfg)
    assert code == 0 and checks["b_F_equals_b_bar"]
    rows = list(csv.DictReader((tmp_path / "out" / "family_sweep.csv").open()))
    for r in rows:
        if r["level"] == "0":
            assert float(r["b_F"]) == pytest.approx(float(r["b_bar"]), abs=1e-10)


def test_report_collects_checks(tmp_path, capsys):
    cfg = _cfg(tmp_path, cover={"A0": 1.0, "A1": 2.0, "sigma": 0.6, "mc_samples": 1000,
                                "membership_samples": 5})
    run("cover", cfg)
    code, checks = run("report", cfg)
    assert code == 0 and "cover.trivial_stage" in checks
    assert "PASS  cover.trivial_stage" in (tmp_path / "out" / "report.txt").read_text()


def test_auto_schedule():
    assert auto_schedule(4) == [(1, 5), (1, 7), (2, 6), (2, 8)]
