import json
from functools import partial

import numpy as np
import pytest

from isac_lab import cli
from isac_lab.harness import (DEFAULT_SEED, ConfigError, ExperimentConfig, aggregate,
                              build_config, builtin_experiments, get_experiment, monte_carlo,
                              run_experiment)
from isac_lab.harness.config import load_file, merge, parse_assignment
from isac_lab.harness.experiments import RADAR_DEFAULTS


def _cfg(name, trials=None, assignments=(), out=None, seed=None):
    exp = get_experiment(name)
    return build_config(name, exp.defaults, exp.default_trials, None, list(assignments),
                        seed, trials, out)


def _draw(scale, stream):
    return scale * stream.normal()


# ------------------------------------------------------------------ config

def test_merge_type_checks_and_paths():
    defaults = {"a": 1, "b": {"c": 2.0, "d": "1/4"}, "flag": True,
                "items": [{"x": 1.0, "y": 0.0}], "xs": [1, 2]}
    out = merge(defaults, {"b": {"c": 3, "d": 0.125}, "items": [{"x": 5}], "xs": [4]})
    assert out["b"] == {"c": 3.0, "d": "0.125"}
    assert out["items"] == [{"x": 5.0, "y": 0.0}] and out["xs"] == [4]
    assert defaults["b"]["c"] == 2.0
    cases = [({"zz": 1}, "zz: unknown field"), ({"b": {"q": 1}}, "b.q: unknown field"),
             ({"a": "x"}, "a: expected an integer"), ({"a": True}, "a: expected an integer"),
             ({"flag": 1}, "flag: expected a boolean"), ({"b": {"c": "fast"}}, "b.c: expected"),
             ({"items": [{"x": 1, "w": 2}]}, "items[0].w: unknown field"),
             ({"xs": [1, "two"]}, "xs[1]: expected an integer"), ({"b": 3}, "b: expected a mapping")]
    for override, msg in cases:
        with pytest.raises(ConfigError, match=msg.replace("[", r"\[").replace("]", r"\]")):
            merge(defaults, override)


def test_parse_assignment():
    assert parse_assignment("system.cp_len=32") == (["system", "cp_len"], 32)
    assert parse_assignment("pilot_ratio=1/4") == (["pilot_ratio"], "1/4")
    assert parse_assignment("snr_db=[0, 10]") == (["snr_db"], [0, 10])
    for bad in ("novalue", "=3", "a..b=1", "a=[1,"):
        with pytest.raises(ConfigError):
            parse_assignment(bad)


def test_build_config_layers(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("seed: 7\ntrials: 3\nparams:\n  system:\n    cp_len: 16\n  snr_db: 5\n")
    exp = get_experiment("range-velocity")
    cfg = build_config(exp.name, exp.defaults, exp.default_trials, load_file(path),
                       ["system.cp_len=8"], None, 2, tmp_path / "o")
    assert cfg.seed == 7 and cfg.trials == 2
    assert cfg.get("system.cp_len") == 8 and cfg.params["snr_db"] == 5.0
    assert cfg.get("system.n_subcarriers") == 128
    top = build_config(exp.name, exp.defaults, 1, {"snr_db": 3}, [])
    assert top.params["snr_db"] == 3.0 and top.seed == DEFAULT_SEED


def test_build_config_errors(tmp_path):
    exp = get_experiment("se-vs-cp")
    with pytest.raises(ConfigError, match="params.n_subcarrier: unknown field"):
        build_config(exp.name, exp.defaults, 1, {"params": {"n_subcarrier": 4}})
    with pytest.raises(ConfigError, match="trials"):
        build_config(exp.name, exp.defaults, 1, {"trials": 0})
    with pytest.raises(ConfigError, match="seed"):
        build_config(exp.name, exp.defaults, 1, {"seed": "abc"})
    with pytest.raises(ConfigError, match="file is for"):
        build_config(exp.name, exp.defaults, 1, {"experiment": "psd"})
    bad = tmp_path / "bad.yaml"
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_file(bad)
    with pytest.raises(ConfigError, match="cannot read"):
        load_file(tmp_path / "missing.yaml")


def test_experiment_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig("x", {}, trials=0)
    with pytest.raises(ConfigError):
        ExperimentConfig("x", {}, trials=1, workers=0)


def test_semantic_validation_names_field():
    with pytest.raises(ConfigError, match="params.system"):
        run_experiment(_cfg("range-velocity", 1, ["system.n_subcarriers=100"]), write=False)
    with pytest.raises(ConfigError, match=r"params.schemes\[0\]"):
        run_experiment(_cfg("psd", 1, ["schemes=[{kind: CI, pilot_ratio: 3/4}]"]), write=False)
    with pytest.raises(ConfigError, match="params.cp_lens"):
        run_experiment(_cfg("mse-pc", 1, ["cp_lens=[24]"]), write=False)
    with pytest.raises(ConfigError, match="params.targets"):
        run_experiment(_cfg("range-velocity", 1, ["targets=[{range_m: 5000}]"]), write=False)


# ------------------------------------------------------------------ runner

def test_aggregate_and_single_trial():
    res = aggregate("r", np.array([[1.0, 2.0], [3.0, np.nan]]), [0, 1], "x", "m")
    assert np.allclose(res.mean, [2.0, 2.0])
    assert np.isclose(res.stderr[0], np.std([1, 3], ddof=1) / np.sqrt(2))
    one = aggregate("r", np.array([[1.0, 2.0]]), [0, 1], "x", "m")
    assert one.stderr is None and one.to_summary()["stderr"] is None


def test_monte_carlo_lane_replay_and_workers():
    fn = partial(_draw, 2.0)
    a = monte_carlo(fn, 20, 11, ("lane",))
    b = monte_carlo(fn, 20, 11, ("lane",), workers=3)
    assert a == b
    from isac_lab.numerics import RandomStream
    assert a[7] == 2.0 * RandomStream(11, ("lane", 7)).normal()
    with pytest.raises(ValueError):
        monte_carlo(fn, 0, 11, ())


def test_byte_identical_outputs(tmp_path):
    for name, trials in [("se-vs-cp", 20), ("range-velocity", 3), ("psd", 2)]:
        files = []
        for run in ("a", "b"):
            cfg = _cfg(name, trials, out=tmp_path / name / run)
            run_experiment(cfg)
            files.append({p.name: p.read_bytes() for p in sorted((tmp_path / name / run).iterdir())
                          if p.name != "timing.json"})
        assert files[0] == files[1]
        assert "summary.json" in files[0] and "plot.py" in files[0]


def test_single_trial_summary_has_no_stderr(tmp_path):
    cfg = _cfg("se-vs-n", 1, ["n_values=[64, 128]"], out=tmp_path)
    run_experiment(cfg)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config"]["trials"] == 1 and summary["config"]["seed"] == DEFAULT_SEED
    assert summary["metrics"]["aps_ues"]["stderr"] is None
    lines = (tmp_path / "aps_ues.csv").read_text().splitlines()
    assert lines[0] == "n_subcarriers,mean,stderr,n_trials"
    assert lines[1].split(",")[2] == ""
    timing = json.loads((tmp_path / "timing.json").read_text())
    assert timing["wall_time_s"] >= 0


def test_seed_changes_results():
    a = run_experiment(_cfg("se-vs-cp", 20, seed=1), write=False).result("aps_ues").mean
    b = run_experiment(_cfg("se-vs-cp", 20, seed=2), write=False).result("aps_ues").mean
    assert not np.array_equal(a, b)


def test_worker_count_does_not_change_results():
    a = run_experiment(_cfg("se-vs-n", 30), write=False).result("aps_ues").mean
    cfg = _cfg("se-vs-n", 30)
    cfg.workers = 2
    b = run_experiment(cfg, write=False).result("aps_ues").mean
    assert np.array_equal(a, b)


# ----------------------------------------------------------------- catalog

def test_catalog():
    cat = builtin_experiments()
    assert len(cat) >= 10
    for name in ("se-vs-cp", "se-vs-n", "se-distributions", "psd", "mse-pc", "mse-nopc",
                 "complexity-tables", "signaling-table", "ambiguity", "range-velocity"):
        assert name in cat
    with pytest.raises(ConfigError, match="unknown"):
        get_experiment("nope")


def test_range_velocity_defaults():
    d = RADAR_DEFAULTS
    assert d["system"] == {"n_subcarriers": 128, "n_symbols": 64, "subcarrier_spacing": 60e3,
                           "cp_len": 32, "carrier_freq": 24e9}
    assert [(t["range_m"], t["velocity_mps"]) for t in d["targets"]] == [
        (200.0, -40.0), (400.0, 0.0), (600.0, 40.0)]
    assert d["snr_db"] == 10.0
    assert get_experiment("range-velocity").default_trials >= 100


def test_ambiguity_defaults_and_run():
    d = get_experiment("ambiguity").defaults
    assert (d["n_subcarriers"], d["pilot_ratio"], d["block_ratio"]) == (32, "1/4", "1/4")
    out = run_experiment(_cfg("ambiguity"), write=False)
    curve = out.table("ambiguity")
    assert curve.rows[0][1:] == [1.0, 1.0, 1.0]
    res = {r[0]: r for r in out.table("resolution").rows}
    assert res["CI(1/4)"][1] == 8 and res["CB(1/4)"][1] == 8


def test_se_vs_cp_tracks_expectation():
    out = run_experiment(_cfg("se-vs-cp", 300, ["cp_lens=[16, 32, 64]"]), write=False)
    res = out.result("aps_ues")
    for cp, m in zip(res.x, res.mean):
        assert abs(m / (2 * 1024 / cp) - 1) < 0.05


def test_psd_nonpc_margin_smaller():
    out = run_experiment(_cfg("psd", 5), write=False)
    margins = {r[0]: r[1] for r in out.table("psd_mask_margins").rows}
    for ratio in ("1/4", "1/8"):
        assert margins[f"CI({ratio})-NonPC"] < margins[f"CI({ratio})-PC"]
    assert margins["APS-PC"] > 0
    assert any("compliant" in n for n in out.notes)


def test_psd_missing_mask_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="params.mask"):
        run_experiment(_cfg("psd", 1, [f"mask={tmp_path / 'none.txt'}"]), write=False)


def test_table_experiments():
    out = run_experiment(_cfg("complexity-tables"), write=False)
    rows = out.table("complexity").rows
    assert rows[0][4:6] == [43040, 5380]
    assert any("BS additions" in n for n in out.notes)
    sig = run_experiment(_cfg("signaling-table"), write=False).table("signaling").rows
    assert [r[4] for r in sig] == [64, 128, 256, 8, 24, 64, 8, 24, 64]


def test_mse_experiment_small(tmp_path):
    cfg = _cfg("mse-nopc", 3, ["cp_lens=[16]", "snr_db=[0, 20]"], out=tmp_path)
    out = run_experiment(cfg)
    names = {r.name for r in out.results}
    assert "mse_flat_cp16_APS" in names and "mse_selective_cp16_CI" in names
    assert (tmp_path / "mse_nonpc.csv").exists()


def test_range_velocity_outputs(tmp_path):
    cfg = _cfg("range-velocity", 2, ["map_oversample=1"], out=tmp_path)
    out = run_experiment(cfg)
    assert {r[0] for r in out.table("range_mse").rows} == {
        "APS", "CI(1/4)", "CI(1/8)", "CB(1/4)", "CB(1/8)"}
    assert (tmp_path / "map_APS.csv").exists() and (tmp_path / "range_mse_CB_1_8.csv").exists()
    compile((tmp_path / "plot.py").read_text(), "plot.py", "exec")


# --------------------------------------------------------------------- CLI

def test_cli_list_and_tables(capsys):
    assert cli.main(["list"]) == 0
    assert "range-velocity" in capsys.readouterr().out
    assert cli.main(["tables"]) == 0
    text = capsys.readouterr().out
    assert "43040" in text and "12068" in text and "Note:" in text
    assert cli.main(["tables", "--n", "100"]) == 2


def test_cli_run(tmp_path, capsys):
    rc = cli.main(["run", "se-vs-cp", "--trials", "5", "--seed", "3", "--out", str(tmp_path),
                   "--set", "cp_lens=[16, 32]"])
    assert rc == 0
    assert "wrote results" in capsys.readouterr().out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config"]["seed"] == 3 and summary["config"]["params"]["cp_lens"] == [16, 32]


def test_cli_errors(tmp_path, capsys):
    assert cli.main(["run", "nope"]) == 2
    assert cli.main(["run", "se-vs-cp", "--set", "cp_len=4", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "cp_len: unknown field" in err
    assert cli.main(["run", "se-vs-cp", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert cli.main(["run", "se-vs-cp", "--workers", "0"]) == 2
    with pytest.raises(SystemExit):
        cli.main(["bogus"])
