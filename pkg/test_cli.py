"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026
"""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from cli import cli, comparison_summary
from data import load_predictions_csv, save_predictions_csv
from database import list_runs
from experiments import ComparisonRow
from metrics import PredictionSet

QUICK_TRAIN = ["--epochs", "3"]


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def quick_config(tmp_path):
    path = tmp_path / "quick.json"
    path.write_text(json.dumps({
        "data": {"blobs": {"K": 3, "d": 4, "n_per_class": 40, "center_scale": 2.0, "noise_sigma": 0.5, "seed": 1}},
        "train": {"hidden_dims": [8], "epochs": 3, "batch_size": 16},
    }), encoding="utf-8")
    return path


def invoke(runner, *args):
    return runner.invoke(cli, [str(a) for a in args], catch_exceptions=False)


def test_help_lists_commands(runner):
    result = invoke(runner, "--help")
    assert result.exit_code == 0
    for name in ("gen-data", "train", "eval", "calibrate", "verify", "sweep-margin", "compare",
                 "penalty-profile", "runs"):
        assert name in result.output


def test_gen_data_is_byte_identical(runner, tmp_path, quick_config):
    for out in ("a", "b"):
        result = invoke(runner, "gen-data", "--config", quick_config, "--out", tmp_path / out)
        assert result.exit_code == 0
    for name in ("train.csv", "val.csv", "test.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["blobs"] == {"K": 3, "d": 4, "n_per_class": 40, "center_scale": 2.0,
                                 "noise_sigma": 0.5, "seed": 1}
    assert manifest["sizes"] == {"train": 72, "val": 24, "test": 24}


def test_gen_data_manifest_hash_tracks_the_data_config(runner, tmp_path, quick_config):
    assert invoke(runner, "gen-data", "--config", quick_config, "--out", tmp_path / "a").exit_code == 0
    assert invoke(runner, "gen-data", "--config", quick_config, "--out", tmp_path / "b", "--seed", 2).exit_code == 0
    first = json.loads((tmp_path / "a" / "manifest.json").read_text(encoding="utf-8"))
    second = json.loads((tmp_path / "b" / "manifest.json").read_text(encoding="utf-8"))
    assert len(first["config_hash"]) == 64
    assert first["config_hash"] != second["config_hash"]


def test_train_writes_outputs_and_is_repeatable(runner, tmp_path, quick_config, ledger_url):
    invoke(runner, "gen-data", "--config", quick_config, "--out", tmp_path / "data")
    for out in ("a", "b"):
        result = invoke(runner, "train", "--config", quick_config, "--data", tmp_path / "data",
                        "--loss", "mbls", "--margin", 6, "--lambda", 0.1, "--out", tmp_path / out)
        assert result.exit_code == 0, result.output
    history = (tmp_path / "a" / "history.csv").read_text(encoding="utf-8").splitlines()
    assert history[0] == "epoch,train_loss,val_loss,val_acc,val_ece"
    assert len(history) == 1 + 3
    for name in ("test_predictions.csv", "checkpoint.json", "metrics.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    assert invoke(runner, "runs", "--command", "train").exit_code == 0
    recorded = list_runs(ledger_url, command="train")["runs"]
    assert [r["loss"] for r in recorded] == ["MBLS(m=6, lambda=0.1)"] * 2
    assert recorded[0]["epochs"] == 3


def test_train_rejects_bad_config(runner, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"train": {"unknown": 1}}), encoding="utf-8")
    assert invoke(runner, "train", "--config", path).exit_code == 3


def test_train_missing_data_files(runner, tmp_path):
    result = invoke(runner, "train", "--data", tmp_path / "nowhere", *QUICK_TRAIN)
    assert result.exit_code == 4


def test_eval_four_sample_fixture(runner, tmp_path):
    preds = PredictionSet(logits=np.array([[np.log(9.0), 0.0]] * 4), labels=np.array([0, 0, 0, 1]))
    save_predictions_csv(preds, tmp_path / "p.csv")
    result = invoke(runner, "eval", tmp_path / "p.csv", "--svg", tmp_path / "p.svg")
    assert result.exit_code == 0
    assert "15.00" in result.output
    assert "75.00" in result.output
    table = (tmp_path / "p_reliability.csv").read_text(encoding="utf-8").splitlines()
    assert table[0] == "bin_lo,bin_hi,count,accuracy,mean_confidence"
    assert len(table) == 26
    assert (tmp_path / "p.svg").read_text(encoding="utf-8").lstrip().startswith("<?xml")


def test_eval_parse_error(runner, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("l0,l1,label\n0.1,oops,0\n", encoding="utf-8")
    result = invoke(runner, "eval", path)
    assert result.exit_code == 4


def test_eval_invalid_utf8_is_a_data_error(runner, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_bytes(b"l0,l1,label\n0.1,0.2,0\n\xff\xfe,0.3,1\n")
    result = invoke(runner, "eval", path)
    assert result.exit_code == 4


def test_calibrate_overconfident(runner, tmp_path, overconfident_preds):
    scaled, _ = overconfident_preds
    save_predictions_csv(scaled, tmp_path / "val.csv")
    save_predictions_csv(scaled, tmp_path / "test.csv")
    result = invoke(runner, "calibrate", tmp_path / "val.csv", tmp_path / "test.csv", "--out", tmp_path / "cal")
    assert result.exit_code == 0
    report = json.loads((tmp_path / "cal" / "calibration.json").read_text(encoding="utf-8"))
    assert report["t_star"] > 1.0
    assert report["test"]["ece_post"] < report["test"]["ece_pre"]
    assert report["test"]["acc_post"] == report["test"]["acc_pre"]
    assert report["t_min"] == 0.1 and report["t_max"] == 5.0 and report["resolution"] == 0.1
    calibrated = load_predictions_csv(tmp_path / "cal" / "calibrated_test_predictions.csv")
    np.testing.assert_allclose(calibrated.logits, scaled.logits / report["t_star"])


def test_calibrate_bad_bounds(runner, tmp_path, four_sample_preds):
    save_predictions_csv(four_sample_preds, tmp_path / "p.csv")
    result = invoke(runner, "calibrate", tmp_path / "p.csv", tmp_path / "p.csv", "--t-min", 2.0)
    assert result.exit_code == 3


def test_eval_reads_metrics_from_config(runner, tmp_path, four_sample_preds):
    save_predictions_csv(four_sample_preds, tmp_path / "p.csv")
    config = tmp_path / "metrics.json"
    config.write_text(json.dumps({"metrics": {"ece_bins": 15, "diagram_bins": 10}}), encoding="utf-8")
    result = invoke(runner, "eval", tmp_path / "p.csv", "--config", config)
    assert result.exit_code == 0
    assert len((tmp_path / "p_reliability.csv").read_text(encoding="utf-8").splitlines()) == 11
    result = invoke(runner, "eval", tmp_path / "p.csv", "--config", config, "--diagram-bins", 5)
    assert result.exit_code == 0
    assert len((tmp_path / "p_reliability.csv").read_text(encoding="utf-8").splitlines()) == 6


def test_calibrate_reads_grid_from_config(runner, tmp_path, overconfident_preds):
    scaled, _ = overconfident_preds
    save_predictions_csv(scaled, tmp_path / "val.csv")
    config = tmp_path / "grid.json"
    config.write_text(json.dumps({"calibration": {"t_min": 0.5, "t_max": 3.0, "resolution": 0.25}}),
                      encoding="utf-8")
    result = invoke(runner, "calibrate", tmp_path / "val.csv", tmp_path / "val.csv",
                    "--config", config, "--t-max", 4.0, "--out", tmp_path / "cal")
    assert result.exit_code == 0
    report = json.loads((tmp_path / "cal" / "calibration.json").read_text(encoding="utf-8"))
    assert report["t_min"] == 0.5 and report["t_max"] == 4.0 and report["resolution"] == 0.25
    assert 0.5 <= report["t_star"] <= 4.0


def test_calibrate_rejects_unknown_config_keys(runner, tmp_path, four_sample_preds):
    save_predictions_csv(four_sample_preds, tmp_path / "p.csv")
    config = tmp_path / "grid.json"
    config.write_text(json.dumps({"calibration": {"t_lo": 0.5}}), encoding="utf-8")
    result = invoke(runner, "calibrate", tmp_path / "p.csv", tmp_path / "p.csv", "--config", config)
    assert result.exit_code == 3


def test_verify_quick_passes(runner):
    result = invoke(runner, "verify", "--quick")
    assert result.exit_code == 0
    assert "FAIL" not in result.output


def test_verify_injected_gradient_error_fails(runner):
    result = invoke(runner, "verify", "--quick", "--inject-grad-error", 1e-3)
    assert result.exit_code == 5


def test_sweep_margin(runner, tmp_path, quick_config):
    result = invoke(runner, "sweep-margin", "--config", quick_config, "--margins", "0,6",
                    "--weights", "0.1", "--out", tmp_path / "sweep")
    assert result.exit_code == 0, result.output
    sweep = (tmp_path / "sweep" / "margin_sweep.csv").read_text(encoding="utf-8").splitlines()
    assert len(sweep) == 3
    matched = (tmp_path / "sweep" / "matched_weights.csv").read_text(encoding="utf-8").splitlines()
    assert [line.split(",")[1] for line in matched[1:]] == ["LS", "MBLS(m=0)"]
    assert matched[0].split(",")[-1] == "loss_weight"
    assert [float(line.split(",")[-1]) for line in matched[1:]] == pytest.approx([0.1, 0.1 / 3])


def test_sweep_margin_bad_list(runner):
    assert invoke(runner, "sweep-margin", "--margins", "2,x").exit_code == 2


def test_compare(runner, tmp_path, quick_config, ledger_url):
    result = invoke(runner, "compare", "--config", quick_config, "--seeds", "0,1", "--margins", "2,6",
                    "--weights", "0.1", "--out", tmp_path / "compare")
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "compare" / "comparison.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "seed,method,margin,test_acc,test_ece,test_confidence"
    assert [line.split(",")[:2] for line in lines[1:5]] == [
        ["0", "CE"], ["0", "MBLS"], ["0", "LS@0.1"], ["0", "MBLS(m=0)@0.1"]]
    assert lines[2].split(",")[2] in ("2", "6")
    assert len(lines) == 9
    assert len(list_runs(ledger_url, command="compare")["runs"]) == 1


def test_comparison_summary():
    def row(seed, method, acc, ece_value, conf):
        return ComparisonRow(seed=seed, method=method, test_acc=acc, test_ece=ece_value, test_confidence=conf)

    rows = [
        row(0, "CE", 0.80, 0.10, 0.90), row(0, "MBLS", 0.80, 0.03, 0.82),
        row(0, "LS@0.1", 0.80, 0.05, 0.85), row(0, "MBLS(m=0)@0.1", 0.80, 0.06, 0.86),
        row(1, "CE", 0.80, 0.02, 0.79), row(1, "MBLS", 0.80, 0.04, 0.83),
        row(1, "LS@0.1", 0.80, 0.06, 0.85), row(1, "MBLS(m=0)@0.1", 0.80, 0.01, 0.80),
    ]
    assert comparison_summary(rows) == {
        "CE overconfident": "1/2 seeds",
        "MBLS ECE below CE": "1/2 seeds",
        "LS / MBLS(m=0) agree vs CE at w=0.1": "1/2 seeds",
    }


def test_penalty_profile(runner, tmp_path):
    path = tmp_path / "profile.csv"
    result = invoke(runner, "penalty-profile", "--margin", 2, "--max-distance", 4, "--step", 1, "--out", path)
    assert result.exit_code == 0
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "distance,linear,linear_grad,margin,margin_grad"
    assert lines[1:] == ["0,0,1,0,0", "1,1,1,0,0", "2,2,1,0,0", "3,3,1,1,1", "4,4,1,2,1"]


def test_no_ledger(runner):
    result = invoke(runner, "--no-ledger", "runs")
    assert result.exit_code == 4


def test_runs_schema(runner):
    result = invoke(runner, "runs", "--schema")
    assert result.exit_code == 0
    assert "epoch_metrics" in result.output
