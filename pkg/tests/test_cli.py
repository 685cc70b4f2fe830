import json

import numpy as np
import pytest

from graspcascade.cli import main
from graspcascade.configio import preset_path


@pytest.fixture(scope="module")
def demo_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("demos") / "demos.jsonl"
    rc = main(["record-demos", "--episodes", "4", "--seed", "3",
               "--pace", "0.5", "--scene", "scene_cup_toy.yaml",
               "--out", str(path)])
    assert rc == 0
    return path


def test_record_and_validate_demos(demo_file, capsys):
    rc = main(["validate-demos", str(demo_file),
               "--scene", "scene_cup_toy.yaml"])
    out = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert out["episodes"] == 4 and out["valid"]


def test_validate_demos_wrong_scene_exits_3(demo_file):
    rc = main(["validate-demos", str(demo_file)])
    assert rc == 0  # no hashes requested, structure-only validation
    rc = main(["validate-demos", str(demo_file), "--scene",
               "scene_cup_default.yaml"])
    assert rc == 3


def test_replay_demos_bitwise(demo_file, capsys):
    rc = main(["replay", str(demo_file), "--scene", "scene_cup_toy.yaml"])
    assert rc == 0
    assert "0 mismatches" in capsys.readouterr().out


def test_train_zero_steps_clean_exit(tmp_path, demo_file):
    out = tmp_path / "run0"
    rc = main(["train", "--mode", "cascade", "--demos", str(demo_file),
               "--scene", "scene_cup_toy.yaml", "--max-steps", "0",
               "--out", str(out), "--quiet"])
    assert rc == 0
    assert (out / "metrics.jsonl").exists()
    assert (out / "metrics.jsonl").read_text() == ""
    assert (out / "experiment.yaml").exists()


def test_train_missing_demos_exits_2(tmp_path):
    rc = main(["train", "--mode", "cascade", "--scene", "scene_cup_toy.yaml",
               "--max-steps", "100", "--out", str(tmp_path / "x"), "--quiet"])
    assert rc == 2


def test_train_bad_config_file_exits_2(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("format_version: 42\n")
    rc = main(["train", "--config", str(cfg), "--quiet",
               "--out", str(tmp_path / "y")])
    assert rc == 2


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory, demo_file):
    out = tmp_path_factory.mktemp("run") / "tiny"
    rc = main(["train", "--mode", "rl_only", "--scene", "scene_cup_toy.yaml",
               "--max-steps", "600", "--seed", "1", "--out", str(out),
               "--quiet"])
    assert rc == 0
    return out


def test_run_directory_self_describing(tiny_run):
    doc = (tiny_run / "experiment.yaml").read_text()
    assert "scene_hash" in doc and "chain_hash" in doc and "seed" in doc
    assert (tiny_run / "checkpoint.pt").exists()
    assert (tiny_run / "summary.json").exists()


def test_eval_checkpoint(tiny_run, capsys):
    rc = main(["eval", str(tiny_run / "checkpoint.pt"), "--episodes", "3",
               "--seed", "4", "--scene", "scene_cup_toy.yaml"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["episodes"] == 3
    assert "task3_success_rate" in report


def test_eval_zero_episodes_empty_report(tiny_run, capsys):
    rc = main(["eval", str(tiny_run / "checkpoint.pt"), "--episodes", "0",
               "--scene", "scene_cup_toy.yaml"])
    assert rc == 0
    assert json.loads(capsys.readouterr().out) == {"episodes": 0}


def test_eval_hash_mismatch_exits_3(tiny_run):
    rc = main(["eval", str(tiny_run / "checkpoint.pt"), "--episodes", "1",
               "--scene", "scene_cup_default.yaml"])
    assert rc == 3


def test_eval_scripted_oracle(capsys):
    rc = main(["eval-scripted", "--episodes", "5", "--seed", "2",
               "--scene", "scene_cup_toy.yaml"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["task3_success_rate"] == 1.0


# ------------------------------------------------------------------ plot


def synthetic_log(path, n=50, step=1000):
    rows = []
    for k in range(1, n + 1):
        rows.append(json.dumps({
            "iteration": k, "env_steps": k * step,
            "mean_return": float(k),          # linear ramp
            "mean_episode_length": 200.0 - k,
        }))
    path.write_text("\n".join(rows) + "\n")
    return rows


def test_plot_binned_means_match_oracle(tmp_path, capsys):
    log = tmp_path / "metrics.jsonl"
    synthetic_log(log, n=60, step=1000)
    rc = main(["plot", str(log), "--out", str(tmp_path / "plots"),
               "--bin-steps", "20000"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert out["warnings"] == 0
    # oracle: env_steps 1k..60k in 20k bins -> means of 1..19, 20..39, 40..59, 60
    oracle_bins = {}
    for k in range(1, 61):
        oracle_bins.setdefault((k * 1000) // 20000, []).append(float(k))
    assert out["points"] == len(oracle_bins)
    assert (tmp_path / "plots" / "reward_per_episode.png").exists()
    assert (tmp_path / "plots" / "steps_per_episode.png").exists()


def test_plot_empty_log_valid_image(tmp_path, capsys):
    log = tmp_path / "empty.jsonl"
    log.write_text("")
    rc = main(["plot", str(log), "--out", str(tmp_path / "p")])
    assert rc == 0
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert out["points"] == 0
    assert (tmp_path / "p" / "reward_per_episode.png").exists()


def test_plot_skips_malformed_lines_with_warning(tmp_path, capsys):
    log = tmp_path / "m.jsonl"
    rows = synthetic_log(log, n=20, step=1000)
    lines = log.read_text().splitlines()
    lines.insert(10, "{this is not json")
    log.write_text("\n".join(lines))
    rc = main(["plot", str(log), "--out", str(tmp_path / "p2")])
    assert rc == 0
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert out["warnings"] == 1


def test_missing_metrics_exits_3(tmp_path):
    rc = main(["plot", str(tmp_path / "nope.jsonl")])
    assert rc == 3
