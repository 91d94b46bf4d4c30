"""Tests for config handling and the command-line entry points."""

import csv
import json
import os

import numpy as np
import pytest

from poropinn import cli


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def write_cfg(tmp_path, text):
    path = tmp_path / "cfg.yaml"
    path.write_text(text)
    return str(path)


def test_load_config_valid(tmp_path):
    cfg = cli.load_config(write_cfg(tmp_path, """
benchmark: mandel
profile: smoke
train:
  seed: 3
  split: stress
"""))
    assert cfg["benchmark"] == "mandel"
    assert cfg["train"]["seed"] == 3


def test_load_config_unknown_top_key(tmp_path):
    with pytest.raises(cli.ConfigError):
        cli.load_config(write_cfg(tmp_path, """
benchmark: mandel
bogus_section: 1
"""))


def test_load_config_unknown_train_key(tmp_path):
    with pytest.raises(cli.ConfigError):
        cli.load_config(write_cfg(tmp_path, """
benchmark: mandel
train:
  learning_rate_typo: 0.1
"""))


def test_load_config_bad_benchmark(tmp_path):
    with pytest.raises(cli.ConfigError):
        cli.load_config(write_cfg(tmp_path, "benchmark: navier_stokes\n"))


def test_load_config_bad_physics_value(tmp_path):
    with pytest.raises(cli.ConfigError):
        cli.load_config(write_cfg(tmp_path, """
benchmark: mandel
physics:
  nu: 0.7
"""))


def test_build_problem_profiles():
    pr, cfg, info = cli.build_problem("mandel", "smoke")
    assert info["layers"] == [3, 8, 8, 1]
    assert cfg.epochs_per_stage == 25
    pr2, cfg2, _ = cli.build_problem("mandel", "smoke", seed=5, epochs=10)
    assert cfg2.seed == 5 and cfg2.epochs_per_stage == 10


def test_build_problem_dstar_override():
    pr, _, _ = cli.build_problem("mandel", "smoke", dstar=0.6)
    assert pr.meta["dimless"].D_star == pytest.approx(0.6, rel=1e-12)


def test_parse_times():
    np.testing.assert_allclose(cli._parse_times("0.5pi,pi,1.5pi"),
                               [0.5 * np.pi, np.pi, 1.5 * np.pi])
    np.testing.assert_allclose(cli._parse_times("0.1,0.2"), [0.1, 0.2])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def test_check_command_passes(capsys):
    rc = cli.main(["check"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "FAIL" not in out
    assert out.count("[ok]") >= 6
    assert "check: PASS" in out


def test_info_command(capsys):
    rc = cli.main(["info", "--benchmark", "mandel"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "0.9375" in out


def test_oracle_command(tmp_path):
    rc = cli.main(["oracle", "--benchmark", "mandel", "--grid", "5",
                   "--times", "0.1,1.0", "--out", str(tmp_path)])
    assert rc == 0
    files = os.listdir(tmp_path)
    assert any(f.endswith(".csv") for f in files)


def test_run_smoke_artifacts(tmp_path):
    out = str(tmp_path / "run1")
    rc = cli.main(["run", "--benchmark", "mandel", "--profile", "smoke",
                   "--seed", "0", "--out", out])
    assert rc in (0, 3)  # smoke rarely reaches the sequential tolerance
    for name in ("training_log.csv", "fields.csv", "errors.csv",
                 "checkpoint.npz", "summary.json"):
        assert os.path.exists(os.path.join(out, name)), name
    with open(os.path.join(out, "summary.json")) as fh:
        summary = json.load(fh)
    assert summary["config"]["seed"] == 0
    assert summary["epochs_run"] > 0
    with open(os.path.join(out, "training_log.csv")) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == summary["epochs_run"]


def test_run_determinism_smoke(tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = str(tmp_path / tag)
        rc = cli.main(["run", "--benchmark", "mandel", "--profile", "smoke",
                       "--seed", "11", "--out", out])
        assert rc in (0, 3)
        with open(os.path.join(out, "training_log.csv"), "rb") as fh:
            outs.append(fh.read())
    assert outs[0] == outs[1]


def test_unknown_benchmark_flag():
    with pytest.raises(SystemExit):
        cli.main(["run", "--benchmark", "nonsense"])
