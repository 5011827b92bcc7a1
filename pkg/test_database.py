"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026
"""

import json

import pytest
from sqlalchemy.exc import IntegrityError

from database import get_session, ledger_tables, list_runs, record_run
from mlp import EpochRecord, TrainHistory
from models import Run


def test_record_and_list_runs(ledger_url):
    history = TrainHistory([
        EpochRecord(epoch=0, train_loss=1.0, val_loss=float("nan"), val_acc=0.5, val_ece=0.1, learning_rate=0.05),
        EpochRecord(epoch=1, train_loss=0.8, val_loss=0.9, val_acc=0.6, val_ece=0.08, learning_rate=0.05),
    ])
    run_id = record_run(ledger_url, "train", config_hash="abc", loss="CE", seed=3, output_dir="runs/ce",
                        metrics={"accuracy": 0.7, "ece": 0.05, "aece": None, "nll": 0.9}, history=history)
    record_run(ledger_url, "calibrate", metrics={"temperature": 1.7}, details={"val": "v.csv"})

    runs = list_runs(ledger_url)["runs"]
    assert [r["command"] for r in runs] == ["calibrate", "train"]
    trained = runs[1]
    assert trained["run_id"] == run_id
    assert trained["epochs"] == 2
    assert trained["accuracy"] == 0.7 and trained["aece"] is None
    assert runs[0]["temperature"] == 1.7

    assert [r["command"] for r in list_runs(ledger_url, command="train")["runs"]] == ["train"]
    assert len(list_runs(ledger_url, limit=1)["runs"]) == 1

    with get_session(ledger_url) as session:
        stored = session.get(Run, run_id)
        assert stored.epochs[0].val_loss is None
        assert [e.epoch for e in stored.epochs] == [0, 1]
    with get_session(ledger_url) as session:
        details = session.get(Run, run_id + 1).details
    assert json.loads(details) == {"val": "v.csv"}


def test_unknown_command_rejected(ledger_url):
    with pytest.raises(IntegrityError):
        record_run(ledger_url, "serve")


def test_ledger_tables(ledger_url):
    record_run(ledger_url, "calibrate", metrics={"temperature": 1.2})
    tables = {t["name"]: t for t in ledger_tables(ledger_url)["tables"]}
    assert set(tables) == {"runs", "epoch_metrics"}
    assert tables["runs"]["rows"] == 1 and tables["epoch_metrics"]["rows"] == 0
    runs = {c["name"]: c for c in tables["runs"]["columns"]}
    assert runs["run_id"]["primary_key"] and not runs["config_hash"]["primary_key"]
    epochs = {c["name"]: c for c in tables["epoch_metrics"]["columns"]}
    assert epochs["run_id"]["references"] == "runs.run_id"
    assert epochs["epoch"]["references"] is None
