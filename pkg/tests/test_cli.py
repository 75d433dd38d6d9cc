"""End-to-end CLI tests: artifacts, exit codes, sweeps, plots, determinism."""

from __future__ import annotations

import json
import shutil
import subprocess

import pytest

from fedbandit.cli import (
    CSV_COLUMNS,
    _parse_sweep_values,
    main,
    read_rounds_csv,
)
from fedbandit.config import ConfigError


def write_config(path, **overrides):
    raw = {
        "schema_version": 1,
        "label": "clitest",
        "seed": 3,
        "rounds": 4,
        "num_clients": 6,
        "num_malicious": 2,
        "partition": {"beta": 10.0},
        "dataset": {
            "num_classes": 3,
            "num_features": 6,
            "samples_per_class": 30,
            "class_separation": 3.0,
        },
        "train": {"learning_rate": 0.05, "momentum": 0.9, "epochs": 1, "batch_size": 32},
        "attack": {"kind": "standard"},
        "strategy": {"mode": "static", "rule": "median"},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(raw.get(key), dict):
            raw[key] = {**raw[key], **value}
        else:
            raw[key] = value
    path.write_text(json.dumps(raw))
    return raw


def test_run_writes_artifacts_with_exact_header(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path)
    out = tmp_path / "out"
    assert main(["run", str(cfg_path), "--out", str(out)]) == 0

    run_dir = out / "clitest"
    rounds = (run_dir / "rounds.csv").read_text()
    assert rounds.splitlines()[0] == CSV_COLUMNS
    assert len(rounds.splitlines()) == 1 + 4

    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["label"] == "clitest"
    assert summary["rounds"] == 4
    assert "_timing_ms" not in summary

    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["config_hash"] == summary["config_hash"]
    assert manifest["threads"] == 1
    assert manifest["config"]["strategy"]["rule"] == "median"

    printed = capsys.readouterr().out
    assert "final accuracy" in printed
    assert "rounds.csv" in printed


def test_static_rows_have_blank_ucb_adaptive_filled(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path)
    main(["run", str(cfg_path), "--out", str(tmp_path / "a")])
    rows = read_rounds_csv(tmp_path / "a" / "clitest" / "rounds.csv")
    assert all(r["ucb_fedavg"] == "" and r["ucb_krum"] == "" for r in rows)
    assert all(r["chosen_rule"] == "1" for r in rows)
    assert all(r["wall_time_ms"] == "0.0" for r in rows)

    write_config(cfg_path, strategy={"mode": "adaptive", "rule": None})
    main(["run", str(cfg_path), "--out", str(tmp_path / "b")])
    rows = read_rounds_csv(tmp_path / "b" / "clitest" / "rounds.csv")
    assert all(r["ucb_fedavg"] != "" and r["ucb_median"] != "" for r in rows)


def test_rerun_same_config_is_byte_identical(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path, strategy={"mode": "adaptive", "rule": None})
    out = tmp_path / "out"
    main(["run", str(cfg_path), "--out", str(out)])
    first = (out / "clitest" / "rounds.csv").read_bytes()
    first_summary = (out / "clitest" / "summary.json").read_bytes()
    main(["run", str(cfg_path), "--out", str(out)])
    assert (out / "clitest" / "rounds.csv").read_bytes() == first
    assert (out / "clitest" / "summary.json").read_bytes() == first_summary


def test_thread_count_does_not_change_the_log(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path, strategy={"mode": "adaptive", "rule": None})
    main(["run", str(cfg_path), "--out", str(tmp_path / "t1"), "--threads", "1"])
    main(["run", str(cfg_path), "--out", str(tmp_path / "t4"), "--threads", "4"])
    a = (tmp_path / "t1" / "clitest" / "rounds.csv").read_bytes()
    b = (tmp_path / "t4" / "clitest" / "rounds.csv").read_bytes()
    assert a == b


def test_invalid_config_exits_2_with_field_paths(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path, num_clients=20, num_malicious=18,
                 strategy={"mode": "adaptive", "rule": None})
    assert main(["run", str(cfg_path), "--out", str(tmp_path / "out")]) == 2
    err = capsys.readouterr().err
    assert "config error:" in err
    assert "num_clients" in err
    assert "N >= f + 3" in err
    assert not (tmp_path / "out").exists()


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.json")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_label_clash_with_different_config_exits_2(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path)
    out = tmp_path / "out"
    assert main(["run", str(cfg_path), "--out", str(out)]) == 0
    write_config(cfg_path, seed=99)  # same label, different content
    assert main(["run", str(cfg_path), "--out", str(out)]) == 2
    err = capsys.readouterr().err
    assert "already holds a run" in err


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_exits_1(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path, rounds=1, train={"learning_rate": 1e308, "epochs": 2})
    assert main(["run", str(cfg_path), "--out", str(tmp_path / "out")]) == 1
    assert "runtime error" in capsys.readouterr().err


def test_seed_override_suffixes_label(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path)
    out = tmp_path / "out"
    assert main(["run", str(cfg_path), "--out", str(out), "--seed-override", "42"]) == 0
    run_dir = out / "clitest-s42"
    assert run_dir.is_dir()
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 42
    assert manifest["label"] == "clitest-s42"


def test_env_var_sets_output_root(tmp_path, monkeypatch):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path)
    root = tmp_path / "envroot"
    monkeypatch.setenv("FEDBANDIT_OUT", str(root))
    assert main(["run", str(cfg_path)]) == 0
    assert (root / "clitest" / "rounds.csv").exists()


def test_sweep_runs_each_value_and_writes_comparison(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path)
    out = tmp_path / "out"
    rc = main(
        ["sweep", str(cfg_path), "--key", "strategy.rule",
         "--values", "fedavg,median,krum", "--out", str(out)]
    )
    assert rc == 0
    sweep_dir = out / "clitest-sweep-rule"
    for rule in ("fedavg", "median", "krum"):
        assert (sweep_dir / f"clitest-rule-{rule}" / "rounds.csv").exists()

    comparison = (sweep_dir / "comparison.csv").read_text().splitlines()
    assert comparison[0].startswith("strategy.rule,final_accuracy")
    assert len(comparison) == 4
    assert comparison[1].split(",")[0] == "fedavg"

    selection = (sweep_dir / "selection_pct.csv").read_text().splitlines()
    assert len(selection) == 4
    # static sweeps pick their configured rule 100% of the time
    assert selection[1].split(",")[1:] == ["100.0", "0.0", "0.0"]
    assert selection[3].split(",")[1:] == ["0.0", "0.0", "100.0"]


def test_sweep_numeric_key(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path, strategy={"mode": "adaptive", "rule": None})
    out = tmp_path / "out"
    rc = main(
        ["sweep", str(cfg_path), "--key", "reward.lambda_cost",
         "--values", "0.1,2.0", "--out", str(out)]
    )
    assert rc == 0
    sweep_dir = out / "clitest-sweep-lambda_cost"
    rows = (sweep_dir / "comparison.csv").read_text().splitlines()
    assert len(rows) == 3
    assert rows[1].split(",")[0] == "0.1"
    manifest = json.loads(
        (sweep_dir / "clitest-lambda_cost-2.0" / "manifest.json").read_text()
    )
    assert manifest["config"]["reward"]["lambda_cost"] == 2.0


def test_plot_writes_both_images(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path)
    out = tmp_path / "out"
    main(["run", str(cfg_path), "--out", str(out)])
    plots = tmp_path / "plots"
    rc = main(["plot", str(out / "clitest"), "--out", str(plots)])
    assert rc == 0
    assert (plots / "accuracy_curves.svg").stat().st_size > 0
    assert (plots / "selection_bars.svg").stat().st_size > 0


def test_plot_missing_run_dir_exits_1(tmp_path, capsys):
    rc = main(["plot", str(tmp_path / "ghost"), "--out", str(tmp_path)])
    assert rc == 1
    assert "not found" in capsys.readouterr().err


def test_read_rounds_csv_rejects_bad_files(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text(CSV_COLUMNS + "\n")
    with pytest.raises(ValueError, match="no data rows"):
        read_rounds_csv(empty)
    wrong = tmp_path / "wrong.csv"
    wrong.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="unexpected columns"):
        read_rounds_csv(wrong)


def test_parse_sweep_values():
    assert _parse_sweep_values("0.1, 0.5,2") == [0.1, 0.5, 2]
    assert _parse_sweep_values("fedavg,median") == ["fedavg", "median"]
    assert _parse_sweep_values("true,null,x") == [True, None, "x"]
    with pytest.raises(ConfigError):
        _parse_sweep_values(" , ")


def test_console_script_is_installed():
    exe = shutil.which("fedbandit")
    if exe is None:
        pytest.skip("console script not on PATH")
    proc = subprocess.run([exe, "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "0.1.0"
