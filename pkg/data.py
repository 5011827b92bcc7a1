"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026

Synthetic Gaussian-blob datasets with controllable class overlap, seeded
splitting, and the CSV files that connect training, evaluation and
calibration.

File formats (UTF-8, LF line endings, '.' decimal separator, numbers
written with 17 significant digits):

    dataset:      f0,...,f{d-1},label
    predictions:  l0,...,l{K-1},label
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import ConfigError, DataParseError, UsageError
from metrics import PredictionSet

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class BlobSpec(BaseModel):
    """Class means on a sphere of radius center_scale, isotropic Gaussian noise around them."""

    model_config = ConfigDict(extra="forbid")

    K: int = Field(10, ge=2)
    d: int = Field(20, ge=1)
    n_per_class: int = Field(500, ge=1)
    center_scale: float = Field(1.0, gt=0.0)
    noise_sigma: float = Field(0.4, ge=0.0)
    seed: int = Field(0, ge=0)


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise UsageError(f"Features must be an (N, d) matrix, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise UsageError(f"Got {self.labels.size} labels for {self.features.shape[0]} feature rows")
        if self.num_classes < 2:
            raise UsageError(f"Datasets need at least 2 classes, got {self.num_classes}")
        if not np.all(np.isfinite(self.features)):
            raise UsageError("Features contain NaN or Inf")
        if np.any(self.labels < 0) or np.any(self.labels >= self.num_classes):
            raise UsageError(f"Labels must lie in [0, {self.num_classes})")

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def __len__(self) -> int:
        return int(self.features.shape[0])

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(features=self.features[indices], labels=self.labels[indices],
                       num_classes=self.num_classes)


def gen_blobs(spec: BlobSpec) -> Dataset:
    """Exactly n_per_class samples per class, class-major order, fully determined by spec.seed."""
    if not isinstance(spec, BlobSpec):
        try:
            spec = BlobSpec.model_validate(spec)
        except Exception as e:
            raise ConfigError(f"Invalid blob spec: {e}")
    rng = np.random.default_rng(spec.seed)
    directions = rng.standard_normal((spec.K, spec.d))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    # zero-norm draws map to the zero vector
    norms[norms == 0.0] = 1.0
    means = spec.center_scale * directions / norms
    noise = rng.standard_normal((spec.K * spec.n_per_class, spec.d))
    labels = np.repeat(np.arange(spec.K), spec.n_per_class)
    features = means[labels] + spec.noise_sigma * noise
    logger.debug("Generated %d blob samples (K=%d, d=%d, sigma=%g)", len(labels), spec.K, spec.d, spec.noise_sigma)
    return Dataset(features=features, labels=labels, num_classes=spec.K)


def split(ds: Dataset, fractions: Sequence[float], seed: int) -> Tuple[Dataset, Dataset, Dataset]:
    """Seeded permutation, then contiguous train/val/test slices.

    Val and test get floor(N * f); train keeps the remainder.
    """
    if len(fractions) != 3:
        raise UsageError(f"Expected (train, val, test) fractions, got {fractions}")
    f_train, f_val, f_test = (float(f) for f in fractions)
    if min(f_train, f_val, f_test) < 0 or abs(f_train + f_val + f_test - 1.0) > 1e-9:
        raise UsageError(f"Split fractions must be non-negative and sum to 1, got {fractions}")
    n = len(ds)
    n_val = int(np.floor(n * f_val))
    n_test = int(np.floor(n * f_test))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise UsageError(f"Split {fractions} of {n} samples leaves an empty slice ({n_train}/{n_val}/{n_test})")
    order = np.random.default_rng(seed).permutation(n)
    return (
        ds.subset(order[:n_train]),
        ds.subset(order[n_train:n_train + n_val]),
        ds.subset(order[n_train + n_val:]),
    )


def _format(value: float) -> str:
    return format(float(value), ".17g")


def _write_rows(path: PathLike, header: List[str], matrix: np.ndarray, labels: np.ndarray):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(",".join(header) + "\n")
        for row, label in zip(matrix, labels):
            f.write(",".join(_format(v) for v in row) + f",{int(label)}\n")


def _decoded_lines(path: Path, f) -> Iterator[str]:
    for number, raw in enumerate(f, start=1):
        try:
            yield raw.decode("utf-8")
        except UnicodeDecodeError:
            raise DataParseError("Invalid UTF-8", path=str(path), line=number)


def _read_rows(path: PathLike, prefix: str, label_limit: Optional[int] = None,
               limit_to_width: bool = False) -> Tuple[np.ndarray, np.ndarray, int]:
    path = Path(path)
    if not path.exists():
        raise DataParseError("File not found", path=str(path))
    with open(path, "rb") as f:
        reader = csv.reader(_decoded_lines(path, f))
        header = next(reader, None)
        if not header:
            raise DataParseError("Missing header row", path=str(path), line=1)
        width = len(header) - 1
        if limit_to_width:
            label_limit = width
        expected = [f"{prefix}{i}" for i in range(width)] + ["label"]
        if width < 1 or header != expected:
            raise DataParseError(f"Header must be {prefix}0,...,{prefix}{{n-1}},label", path=str(path), line=1)
        values, labels = [], []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != width + 1:
                raise DataParseError(f"Expected {width + 1} columns, got {len(row)}", path=str(path), line=line)
            try:
                numbers = [float(cell) for cell in row[:-1]]
            except ValueError:
                raise DataParseError("Non-numeric cell", path=str(path), line=line)
            if not all(np.isfinite(numbers)):
                raise DataParseError("Non-finite value", path=str(path), line=line)
            try:
                label = int(row[-1])
            except ValueError:
                raise DataParseError(f"Label {row[-1]!r} is not an integer", path=str(path), line=line)
            if label < 0 or (label_limit is not None and label >= label_limit):
                bound = "inf" if label_limit is None else label_limit
                raise DataParseError(f"Label {label} out of range [0, {bound})", path=str(path), line=line)
            values.append(numbers)
            labels.append(label)
    matrix = np.asarray(values, dtype=np.float64).reshape(len(values), width)
    return matrix, np.asarray(labels, dtype=np.int64), width


def save_dataset_csv(ds: Dataset, path: PathLike):
    if len(ds) == 0:
        raise UsageError("Refusing to save an empty dataset")
    _write_rows(path, [f"f{i}" for i in range(ds.dim)] + ["label"], ds.features, ds.labels)


def load_dataset_csv(path: PathLike, num_classes: Optional[int] = None) -> Dataset:
    """Load a dataset; K defaults to max(label) + 1 (at least 2)."""
    features, labels, _ = _read_rows(path, "f", label_limit=num_classes)
    if labels.size == 0:
        raise DataParseError("Dataset file has no rows", path=str(path))
    if num_classes is None:
        num_classes = max(2, int(labels.max()) + 1)
    return Dataset(features=features, labels=labels, num_classes=num_classes)


def save_predictions_csv(preds: PredictionSet, path: PathLike):
    if len(preds) == 0:
        raise UsageError("Refusing to save an empty prediction set")
    _write_rows(path, [f"l{i}" for i in range(preds.num_classes)] + ["label"], preds.logits, preds.labels)


def load_predictions_csv(path: PathLike) -> PredictionSet:
    """Load predictions; K comes from the header's column count."""
    logits, labels, width = _read_rows(path, "l", limit_to_width=True)
    if width < 2:
        raise DataParseError("Prediction files need at least 2 logit columns", path=str(path), line=1)
    return PredictionSet(logits=logits, labels=labels)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return _format(value)
    return str(value)


def write_table_csv(path: PathLike, header: Sequence[str], rows: Sequence[Sequence]):
    """Plain table: floats as above, None as an empty cell."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_cell(v) for v in row) + "\n")


def save_reliability_csv(bins, path: PathLike):
    """bin_lo,bin_hi,count,accuracy,mean_confidence; empty bins leave the last two blank."""
    write_table_csv(path, ["bin_lo", "bin_hi", "count", "accuracy", "mean_confidence"],
                    [(b.lo, b.hi, b.count, b.accuracy, b.mean_confidence) for b in bins])


def save_history_csv(history, path: PathLike):
    write_table_csv(path, ["epoch", "train_loss", "val_loss", "val_acc", "val_ece"],
                    [(r.epoch, r.train_loss, r.val_loss, r.val_acc, r.val_ece) for r in history.records])
