"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026
"""

import numpy as np
import pytest

from data import BlobSpec, gen_blobs, split
from experiments import DatasetSplits
from metrics import PredictionSet


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-seed training reproductions (minutes)")


@pytest.fixture(autouse=True)
def ledger_url(tmp_path, monkeypatch):
    """Every test gets its own SQLite ledger."""
    url = f"sqlite:///{tmp_path / 'ledger.db'}"
    monkeypatch.setenv("CALIBKIT_LEDGER_URL", url)
    return url


@pytest.fixture
def small_splits():
    """A quick 3-class problem for training tests."""
    spec = BlobSpec(K=3, d=4, n_per_class=60, center_scale=2.0, noise_sigma=0.5, seed=1)
    return DatasetSplits(*split(gen_blobs(spec), [0.6, 0.2, 0.2], seed=2))


@pytest.fixture
def four_sample_preds():
    """Two classes, confidence 0.9 everywhere, three of four correct: ECE = 0.15."""
    logits = np.array([[np.log(9.0), 0.0]] * 4)
    labels = np.array([0, 0, 0, 1])
    return PredictionSet(logits=logits, labels=labels)


@pytest.fixture
def overconfident_preds():
    """Labels drawn from softmax(z), logits reported as 4 z."""
    rng = np.random.default_rng(7)
    z = rng.normal(0.0, 1.0, size=(3000, 5))
    probs = np.exp(z - z.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    labels = np.array([rng.choice(5, p=p) for p in probs])
    return PredictionSet(logits=4.0 * z, labels=labels), PredictionSet(logits=z, labels=labels)
