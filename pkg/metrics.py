"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026

Calibration and discriminative metrics over a set of predictions:
ECE on equal-width bins, adaptive-bin ECE, accuracy, NLL, and the
per-bin tables behind reliability diagrams.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np
from pydantic import BaseModel

from errors import UsageError
from numerics import _log_softmax, _logit_distances, _softmax, as_logits

logger = logging.getLogger(__name__)

DEFAULT_ECE_BINS = 15
DEFAULT_DIAGRAM_BINS = 25


@dataclass(frozen=True)
class PredictionRecord:
    logits: np.ndarray
    label: int
    confidence: float
    predicted: int

    @property
    def correct(self) -> bool:
        return self.predicted == self.label


@dataclass
class PredictionSet:
    """Logits (N, K) and labels (N,) for one evaluated split."""

    logits: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.logits.ndim != 2:
            raise UsageError(f"Prediction logits must be (N, K), got shape {self.logits.shape}")
        if self.labels.shape != (self.logits.shape[0],):
            raise UsageError(f"Got {self.labels.size} labels for {self.logits.shape[0]} logit rows")
        if self.logits.shape[0] > 0:
            as_logits(self.logits)
            if np.any(self.labels < 0) or np.any(self.labels >= self.num_classes):
                raise UsageError(f"Labels must lie in [0, {self.num_classes})")

    @property
    def num_classes(self) -> int:
        return int(self.logits.shape[1])

    def __len__(self) -> int:
        return int(self.logits.shape[0])

    def __iter__(self) -> Iterator[PredictionRecord]:
        confidences = self.confidences()
        predicted = self.predicted()
        for i in range(len(self)):
            yield PredictionRecord(
                logits=self.logits[i],
                label=int(self.labels[i]),
                confidence=float(confidences[i]),
                predicted=int(predicted[i]),
            )

    def confidences(self) -> np.ndarray:
        if len(self) == 0:
            return np.empty(0)
        return np.max(_softmax(self.logits), axis=1)

    def predicted(self) -> np.ndarray:
        # np.argmax returns the lowest index among ties
        if len(self) == 0:
            return np.empty(0, dtype=np.int64)
        return np.argmax(self.logits, axis=1)

    def correct(self) -> np.ndarray:
        return (self.predicted() == self.labels).astype(np.float64)


class BinStats(BaseModel):
    lo: float
    hi: float
    count: int
    accuracy: Optional[float] = None
    mean_confidence: Optional[float] = None


class DistanceSummary(BaseModel):
    """Logit-distance statistics of a prediction set."""

    mean_distance: float
    mean_max_distance: float
    margin: Optional[float] = None
    fraction_above_margin: Optional[float] = None


def _require_non_empty(preds: PredictionSet):
    if len(preds) == 0:
        raise UsageError("Metrics need a non-empty prediction set")


def _require_bins(num_bins: int):
    if num_bins < 1:
        raise UsageError(f"Number of bins must be >= 1, got {num_bins}")


def bin_edges(num_bins: int) -> np.ndarray:
    """Edges i/M for i = 0..M."""
    return np.arange(num_bins + 1, dtype=np.float64) / num_bins


def equal_width_assignment(confidences: np.ndarray, num_bins: int) -> np.ndarray:
    """0-based bin index per confidence: bin i covers (i/M, (i+1)/M], bin 0 also holds 0."""
    edges = bin_edges(num_bins)
    index = np.searchsorted(edges, confidences, side="left") - 1
    return np.clip(index, 0, num_bins - 1)


def _bin_stats(lo: float, hi: float, correct: np.ndarray, confidences: np.ndarray) -> BinStats:
    count = int(correct.size)
    if count == 0:
        return BinStats(lo=lo, hi=hi, count=0)
    return BinStats(
        lo=lo,
        hi=hi,
        count=count,
        accuracy=float(np.mean(correct)),
        mean_confidence=float(np.mean(confidences)),
    )


def bin_equal_width(preds: PredictionSet, M: int = DEFAULT_ECE_BINS) -> List[BinStats]:
    _require_bins(M)
    _require_non_empty(preds)
    confidences = preds.confidences()
    correct = preds.correct()
    assignment = equal_width_assignment(confidences, M)
    edges = bin_edges(M)
    bins = []
    for i in range(M):
        mask = assignment == i
        bins.append(_bin_stats(float(edges[i]), float(edges[i + 1]), correct[mask], confidences[mask]))
    return bins


def adaptive_group_sizes(n: int, num_bins: int) -> List[int]:
    """Sizes ceil(N/M) or floor(N/M), larger groups first."""
    base, extra = divmod(n, num_bins)
    return [base + 1] * extra + [base] * (num_bins - extra)


def bin_adaptive(preds: PredictionSet, M: int = DEFAULT_ECE_BINS) -> List[BinStats]:
    _require_bins(M)
    _require_non_empty(preds)
    if len(preds) < M:
        raise UsageError(f"Adaptive binning needs N >= M (N={len(preds)}, M={M})")
    confidences = preds.confidences()
    correct = preds.correct()
    order = np.argsort(confidences, kind="stable")
    bins = []
    start = 0
    for size in adaptive_group_sizes(len(preds), M):
        idx = order[start:start + size]
        start += size
        group_conf = confidences[idx]
        bins.append(_bin_stats(float(np.min(group_conf)), float(np.max(group_conf)), correct[idx], group_conf))
    return bins


def calibration_error(bins: List[BinStats]) -> float:
    """Sum over non-empty bins of |B_m|/N * |A_m - C_m|."""
    total = sum(b.count for b in bins)
    if total == 0:
        raise UsageError("Cannot compute a calibration error over empty bins")
    error = 0.0
    for b in bins:
        if b.count > 0:
            error += (b.count / total) * abs(b.accuracy - b.mean_confidence)
    return error


def ece(preds: PredictionSet, M: int = DEFAULT_ECE_BINS) -> float:
    return calibration_error(bin_equal_width(preds, M))


def aece(preds: PredictionSet, M: int = DEFAULT_ECE_BINS) -> float:
    return calibration_error(bin_adaptive(preds, M))


def accuracy(preds: PredictionSet) -> float:
    _require_non_empty(preds)
    return float(np.mean(preds.correct()))


def mean_confidence(preds: PredictionSet) -> float:
    _require_non_empty(preds)
    return float(np.mean(preds.confidences()))


def nll(preds: PredictionSet) -> float:
    _require_non_empty(preds)
    log_probs = _log_softmax(preds.logits)
    return float(np.mean(-log_probs[np.arange(len(preds)), preds.labels]))


def reliability_table(preds: PredictionSet, M: int = DEFAULT_DIAGRAM_BINS) -> List[BinStats]:
    """Equal-width bins, empty ones included, for accuracy-vs-confidence plots."""
    return bin_equal_width(preds, M)


def distance_summary(preds: PredictionSet, margin: Optional[float] = None) -> DistanceSummary:
    """Mean logit distance to the winner over non-winner classes, per-sample max distance,
    and the share of non-winner distances above `margin`."""
    _require_non_empty(preds)
    distances = _logit_distances(preds.logits)
    winners = preds.predicted()
    mask = np.ones_like(distances, dtype=bool)
    mask[np.arange(len(preds)), winners] = False
    others = distances[mask]
    summary = DistanceSummary(
        mean_distance=float(np.mean(others)),
        mean_max_distance=float(np.mean(np.max(distances, axis=1))),
    )
    if margin is not None:
        summary.margin = float(margin)
        summary.fraction_above_margin = float(np.mean(others > margin))
    return summary


def metrics_report(preds: PredictionSet, ece_bins: int = DEFAULT_ECE_BINS) -> dict:
    """Headline metrics as fractions: acc, ece, aece, nll, mean confidence."""
    report = {
        "n": len(preds),
        "num_classes": preds.num_classes,
        "accuracy": accuracy(preds),
        "ece": ece(preds, ece_bins),
        "nll": nll(preds),
        "mean_confidence": mean_confidence(preds),
        "ece_bins": ece_bins,
    }
    if len(preds) >= ece_bins:
        report["aece"] = aece(preds, ece_bins)
    else:
        logger.warning("Skipping AECE: %d predictions is fewer than %d bins", len(preds), ece_bins)
        report["aece"] = None
    return report
