import json

import pytest

from hivetemp.cli import RUN_MANIFEST, RunConfig, main
from hivetemp.errors import ConfigError


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert main(["synth", "--scenario", "degradation", "--out", str(d)]) == 0
    return d


def test_synth_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", "--scenario", "constant", "--seed", "42", "--span", "5", "--out", str(a)]) == 0
    assert main(["synth", "--scenario", "constant", "--seed", "42", "--span", "5", "--out", str(b)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == lines[1] and "sha256" in lines[0]
    assert _files(a) == _files(b)


def test_analyze_writes_one_file_per_hive_and_method(data, tmp_path, capsys):
    out = tmp_path / "run"
    before = _files(data)
    assert main(["analyze", str(data / "manifest.json"), "--method", "both", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == sorted([
        "estimates_degrading_crosscorr.csv", "estimates_degrading_extremes.csv",
        "estimates_healthy_crosscorr.csv", "estimates_healthy_extremes.csv", RUN_MANIFEST,
    ])
    run = json.loads((out / RUN_MANIFEST).read_text())
    assert len(run["config_hash"]) == 64 and run["version"]
    assert set(run["skipped_windows"]) == {f"{h}/{m}" for h in ("healthy", "degrading")
                                           for m in ("extremes", "crosscorr")}
    assert run["gap_policy"]["interpolate_up_to_min"] == 60
    assert "2 hives x 2 methods" in capsys.readouterr().out
    assert _files(data) == before  # inputs untouched


def test_analyze_rerun_is_byte_identical(data, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["analyze", str(data / "manifest.json"), "--format", "jsonl"]
    assert main(args + ["--out", str(a), "--jobs", "1"]) == 0
    assert main(args + ["--out", str(b), "--jobs", "2"]) == 0
    assert _files(a) == _files(b)


def test_out_dir_from_environment(data, tmp_path, monkeypatch):
    monkeypatch.setenv("HIVETEMP_OUT", str(tmp_path / "envout"))
    assert main(["analyze", str(data / "manifest.json"), "--method", "crosscorr"]) == 0
    assert (tmp_path / "envout" / RUN_MANIFEST).exists()


def test_missing_file_is_data_error_and_leaves_nothing(tmp_path, capsys):
    (tmp_path / "m.json").write_text(json.dumps({"env": "env.csv", "hives": {"a": "a.csv"}}))
    out = tmp_path / "out"
    assert main(["analyze", str(tmp_path / "m.json"), "--out", str(out)]) == 3
    assert not out.exists()
    assert "data error" in capsys.readouterr().err


def test_config_errors_exit_2(data, tmp_path):
    m = str(data / "manifest.json")
    assert main(["analyze", m, "--window-days", "0.5", "--out", str(tmp_path / "x")]) == 2
    assert main(["analyze", m, "--lags", "0,300", "--out", str(tmp_path / "x")]) == 2
    assert main(["analyze", m, "--t-d-calibrate", "2020-01-23T00:00:00+11:00", "--out", str(tmp_path / "x")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["analyze", m, "--method", "nope"])
    assert exc.value.code == 2
    assert not (tmp_path / "x").exists()


def test_failure_removes_partial_outputs(data, tmp_path):
    out = tmp_path / "run"
    assert main(["analyze", str(data / "manifest.json"), "--method", "crosscorr", "--out", str(out)]) == 0
    before = _files(out)
    # classify wants extremes estimates that this run does not have
    assert main(["classify", str(out), "--method", "extremes", "--out", str(out)]) == 2
    assert _files(out) == before


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig("m.json", methods=("fourier",))
    with pytest.raises(ConfigError):
        RunConfig("m.json", t_d=80.0)
    with pytest.raises(ConfigError):
        RunConfig("m.json", t_d_calibration=("2020-01-02T00:00:00+00:00", "2020-01-01T00:00:00+00:00"))
    assert RunConfig("m.json", jobs=1).digest() == RunConfig("m.json", jobs=8).digest()
    assert RunConfig("m.json").digest() != RunConfig("m.json", t_d=35.0).digest()


def test_calibrated_t_d_is_recorded(data, tmp_path):
    out = tmp_path / "run"
    period = "2020-01-22T00:00:00+11:00/2020-01-25T00:00:00+11:00"
    assert main(["analyze", str(data / "manifest.json"), "--t-d-calibrate", period, "--out", str(out)]) == 0
    run = json.loads((out / RUN_MANIFEST).read_text())
    assert run["hives"]["healthy"]["t_d"] != 34.5


def test_downstream_commands(data, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["analyze", str(data / "manifest.json"), "--out", str(out)]) == 0
    capsys.readouterr()
    for cmd in ("classify", "grid", "report"):
        assert main([cmd, str(out), "--out", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].endswith("1 collapse")
    grid = json.loads((out / "grid_crosscorr.json").read_text())
    assert all(0.0 <= c["prop_collapsed"] <= 1.0 for c in grid["cells"])
    report = json.loads((out / "report_crosscorr.json").read_text())
    assert {t["hive_id"] for t in report["timelines"]} == {"healthy", "degrading"}
    assert [z["zone"] for z in report["zones"]] == ["stable", "warning", "collapse"]


def test_classify_all_stable_summary(tmp_path, capsys):
    data, out = tmp_path / "d", tmp_path / "r"
    main(["synth", "--scenario", "constant", "--m", "0.01", "--delta-t", "12", "--span", "10", "--out", str(data)])
    main(["analyze", str(data / "manifest.json"), "--out", str(out)])
    capsys.readouterr()
    assert main(["classify", str(out), "--out", str(out)]) == 0
    assert capsys.readouterr().out.strip() == "0 warnings, 0 collapses"


def test_collapse_stats_command(data, tmp_path, capsys):
    out = tmp_path / "cs"
    assert main(["collapse-stats", str(data / "manifest.json"), "--out", str(out)]) == 0
    line = capsys.readouterr().out
    assert line.startswith("onsets: ") and "healthy=none" in line
    doc = json.loads((out / "collapse_stats.json").read_text())
    assert doc["degrading"]["onset"] is not None
    assert main(["collapse-stats", str(data / "manifest.json"), "--hive", "zz", "--out", str(tmp_path / "z")]) == 2
