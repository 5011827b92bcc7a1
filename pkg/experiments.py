"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026

Multi-run experiments built on the trainer: the margin sweep with
validation-based margin selection, the label smoothing vs. zero-margin
sweep over matched weights, and the multi-seed loss comparison.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, NamedTuple, Optional, Sequence, Union

from joblib import Parallel, delayed
from pydantic import BaseModel, ValidationError

from data import Dataset, gen_blobs, load_dataset_csv, split, write_table_csv
from errors import ConfigError, UsageError
from losses import LossKind, LossSpec
from metrics import DEFAULT_ECE_BINS, PredictionSet, accuracy, distance_summary, ece, mean_confidence
from mlp import MlpModel, TrainConfig, TrainHistory, evaluate, train

logger = logging.getLogger(__name__)

SELECTION_MARGINS = [2.0, 4.0, 6.0, 8.0, 10.0]


class DatasetSplits(NamedTuple):
    train: Dataset
    val: Dataset
    test: Dataset


@dataclass
class TrainingOutcome:
    config: TrainConfig
    model: MlpModel
    history: TrainHistory
    val: PredictionSet
    test: PredictionSet


class MarginRow(BaseModel):
    margin: float
    val_acc: float
    val_ece: float
    test_acc: float
    test_ece: float
    test_confidence: float
    mean_distance: float
    fraction_above_margin: float


class MatchedRow(BaseModel):
    weight: float
    method: str
    test_acc: float
    test_ece: float
    test_confidence: float
    loss_weight: float


class ComparisonRow(BaseModel):
    seed: int
    method: str
    margin: Optional[float] = None
    test_acc: float
    test_ece: float
    test_confidence: float


def build_splits(data_config, seed_offset: int = 0) -> DatasetSplits:
    """Load the configured CSV splits, or generate blobs and split them.

    For generated data, `seed_offset` shifts both the blob seed and the split
    seed so that multi-seed runs see independent draws.
    """
    if data_config.train_path:
        if not (data_config.val_path and data_config.test_path):
            raise ConfigError("train_path, val_path and test_path must be given together")
        k = data_config.num_classes
        return DatasetSplits(
            load_dataset_csv(data_config.train_path, k),
            load_dataset_csv(data_config.val_path, k),
            load_dataset_csv(data_config.test_path, k),
        )
    if data_config.blobs is None:
        raise ConfigError("Config needs either data.blobs or data.train_path/val_path/test_path")
    blobs = data_config.blobs.model_copy(update={"seed": data_config.blobs.seed + seed_offset})
    dataset = gen_blobs(blobs)
    return DatasetSplits(*split(dataset, data_config.splits, data_config.split_seed + seed_offset))


def with_loss(config: TrainConfig, **loss_fields) -> TrainConfig:
    """Copy of `config` whose loss has the given fields replaced (validated)."""
    document = config.loss.model_dump(by_alias=True)
    document.update({("lambda" if key == "lambda_" else key): value for key, value in loss_fields.items()})
    try:
        loss = LossSpec.model_validate(document)
    except ValidationError as e:
        raise ConfigError(f"Invalid loss settings: {e}")
    return config.model_copy(update={"loss": loss})


def run_training(config: TrainConfig, splits: DatasetSplits) -> TrainingOutcome:
    model, history = train(config, splits.train, splits.val)
    return TrainingOutcome(config, model, history, evaluate(model, splits.val), evaluate(model, splits.test))


def run_all(configs: Sequence[TrainConfig], splits: DatasetSplits, workers: int = 1) -> List[TrainingOutcome]:
    """Train every config; results come back in input order whatever the worker count."""
    logger.debug("Training %d configurations with %d worker(s)", len(configs), workers)
    if workers <= 1 or len(configs) <= 1:
        return [run_training(config, splits) for config in configs]
    return Parallel(n_jobs=workers)(delayed(run_training)(config, splits) for config in configs)


def sweep_margins(config: TrainConfig, splits: DatasetSplits, margins: Iterable[float],
                  ece_bins: int = DEFAULT_ECE_BINS, workers: int = 1) -> List[MarginRow]:
    """One MbLS model per margin, all with the same seed and lambda."""
    margins = [float(m) for m in margins]
    if not margins:
        raise UsageError("Margin sweep needs at least one margin")
    configs = [with_loss(config, kind=LossKind.MBLS, margin=m) for m in margins]
    rows = []
    for margin, outcome in zip(margins, run_all(configs, splits, workers)):
        distances = distance_summary(outcome.test, margin)
        rows.append(MarginRow(
            margin=margin,
            val_acc=accuracy(outcome.val),
            val_ece=ece(outcome.val, ece_bins),
            test_acc=accuracy(outcome.test),
            test_ece=ece(outcome.test, ece_bins),
            test_confidence=mean_confidence(outcome.test),
            mean_distance=distances.mean_distance,
            fraction_above_margin=distances.fraction_above_margin,
        ))
        logger.debug("margin %g: val ECE %.4f, test ECE %.4f", margin, rows[-1].val_ece, rows[-1].test_ece)
    return rows


def select_margin(rows: Sequence[MarginRow]) -> MarginRow:
    """Lowest validation ECE; ties go to the smaller margin."""
    if not rows:
        raise UsageError("No sweep rows to select from")
    return min(rows, key=lambda row: (row.val_ece, row.margin))


def matched_lambda(weight: float, num_classes: int) -> float:
    """MBLS(m=0) weight equivalent to LS(alpha=weight).

    With m = 0 the penalty is lambda * sum_k d_k = lambda * K * mean(d), and
    mean(d) brackets KL(u||s) within log K, so lambda = alpha / K puts both
    regularizers on the same scale.
    """
    return weight / num_classes


def matched_weight_rows(config: TrainConfig, splits: DatasetSplits, weights: Iterable[float],
                        ece_bins: int = DEFAULT_ECE_BINS, workers: int = 1) -> List[MatchedRow]:
    """LS(alpha=w) next to MBLS(m=0, lambda=w/K) for each weight w."""
    weights = [float(w) for w in weights]
    num_classes = splits.train.num_classes
    configs, labels = [], []
    for w in weights:
        configs.append(with_loss(config, kind=LossKind.LS, alpha=w))
        labels.append((w, "LS", w))
        penalty_weight = matched_lambda(w, num_classes)
        configs.append(with_loss(config, kind=LossKind.MBLS, margin=0.0, lambda_=penalty_weight))
        labels.append((w, "MBLS(m=0)", penalty_weight))
    rows = []
    for (w, method, loss_weight), outcome in zip(labels, run_all(configs, splits, workers)):
        rows.append(MatchedRow(
            weight=w,
            method=method,
            test_acc=accuracy(outcome.test),
            test_ece=ece(outcome.test, ece_bins),
            test_confidence=mean_confidence(outcome.test),
            loss_weight=loss_weight,
        ))
    return rows


def compare_losses(config: TrainConfig, data_config, seeds: Iterable[int],
                   margins: Sequence[float] = tuple(SELECTION_MARGINS),
                   weights: Sequence[float] = (0.05, 0.1),
                   ece_bins: int = DEFAULT_ECE_BINS, workers: int = 1) -> List[ComparisonRow]:
    """Per seed: CE, MBLS with the margin chosen on validation, and LS / MBLS(m=0) at matched weights.

    Each seed draws its own data (see `build_splits`) and its own initialisation.
    """
    rows: List[ComparisonRow] = []
    for seed in seeds:
        splits = build_splits(data_config, seed_offset=seed)
        seeded = config.model_copy(update={"seed": config.seed + seed})

        def _row(method: str, outcome: TrainingOutcome, margin: Optional[float] = None) -> ComparisonRow:
            return ComparisonRow(seed=seed, method=method, margin=margin,
                                 test_acc=accuracy(outcome.test),
                                 test_ece=ece(outcome.test, ece_bins),
                                 test_confidence=mean_confidence(outcome.test))

        baseline = _row("CE", run_training(with_loss(seeded, kind=LossKind.CE), splits))
        rows.append(baseline)

        sweep = sweep_margins(seeded, splits, margins, ece_bins, workers)
        chosen = select_margin(sweep)
        rows.append(ComparisonRow(seed=seed, method="MBLS", margin=chosen.margin, test_acc=chosen.test_acc,
                                  test_ece=chosen.test_ece, test_confidence=chosen.test_confidence))

        for row in matched_weight_rows(seeded, splits, weights, ece_bins, workers):
            method = f"{row.method}@{row.weight:g}"
            rows.append(ComparisonRow(seed=seed, method=method, margin=0.0 if row.method != "LS" else None,
                                      test_acc=row.test_acc, test_ece=row.test_ece,
                                      test_confidence=row.test_confidence))
        logger.info("seed %d: CE ECE %.4f, MBLS(m=%g) ECE %.4f",
                    seed, baseline.test_ece, chosen.margin, chosen.test_ece)
    return rows


def write_rows_csv(rows: Sequence[BaseModel], path: Union[str, Path]):
    """CSV of pydantic rows in field order."""
    if not rows:
        raise UsageError("Nothing to write")
    header = list(type(rows[0]).model_fields)
    write_table_csv(path, header, [[getattr(row, name) for name in header] for row in rows])
