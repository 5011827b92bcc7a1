"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026

A small fully-connected classifier (rectifier hidden layers, linear output)
with hand-written backpropagation, classical-momentum SGD, and a
deterministic mini-batch training loop with a multi-step learning rate
schedule.

Checkpoint format (UTF-8 JSON):

    {"format": "calibkit-mlp", "version": 1,
     "layer_dims": [d_in, h_1, ..., K],
     "weights": [W_1, ...],   # each d_in x d_out, row-major nested lists
     "biases": [b_1, ...],
     "config_hash": "<sha256 of the TrainConfig>",
     "init": "uniform(+-1/sqrt(fan_in)), zero biases"}
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from data import Dataset
from errors import ConfigError, DataParseError, UsageError
from losses import LossSpec, batch_loss
from metrics import PredictionSet, accuracy, ece

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "calibkit-mlp"
CHECKPOINT_VERSION = 1
INIT_RULE = "uniform(+-1/sqrt(fan_in)), zero biases"


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    loss: LossSpec = Field(default_factory=LossSpec)
    hidden_dims: List[int] = Field(default_factory=lambda: [128])
    epochs: int = Field(60, ge=0)
    batch_size: int = Field(64, ge=1)
    # (epoch_start, learning_rate) steps
    lr_schedule: List[Tuple[int, float]] = Field(default_factory=lambda: [(0, 0.05), (30, 0.005), (45, 0.0005)])
    momentum: float = Field(0.9, ge=0.0, lt=1.0)
    seed: int = Field(0, ge=0)
    shuffle: bool = True

    @field_validator("hidden_dims")
    @classmethod
    def _check_hidden(cls, dims):
        if any(h < 1 for h in dims):
            raise ValueError("hidden layer sizes must be >= 1")
        return dims

    @field_validator("lr_schedule")
    @classmethod
    def _check_schedule(cls, schedule):
        if not schedule:
            raise ValueError("lr_schedule must not be empty")
        starts = [start for start, _ in schedule]
        if starts[0] != 0:
            raise ValueError("lr_schedule must start at epoch 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("lr_schedule epoch starts must be strictly increasing")
        if any(lr <= 0 for _, lr in schedule):
            raise ValueError("learning rates must be > 0")
        return schedule

    def learning_rate(self, epoch: int) -> float:
        """Rate of the last schedule step whose start is <= epoch."""
        rate = self.lr_schedule[0][1]
        for start, lr in self.lr_schedule:
            if start <= epoch:
                rate = lr
        return rate


def config_hash(config: BaseModel) -> str:
    payload = json.dumps(config.model_dump(mode="json", by_alias=True), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class MlpModel:
    layer_dims: List[int]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ConfigError("Parameter count does not match layer_dims")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != expected or b.shape != (expected[1],):
                raise ConfigError(f"Layer {i} has shapes {w.shape}/{b.shape}, expected {expected}")

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(list(self.layer_dims), [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def parameters(self) -> List[np.ndarray]:
        """Weights then bias per layer, in layer order."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float
    val_ece: float
    learning_rate: float


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)


def init_mlp(layer_dims: Sequence[int], seed: int) -> MlpModel:
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ConfigError(f"layer_dims needs >= 2 entries, all >= 1; got {list(layer_dims)}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims, weights, biases)


def _as_inputs(model: MlpModel, x) -> Tuple[np.ndarray, bool]:
    inputs = np.asarray(x, dtype=np.float64)
    single = inputs.ndim == 1
    inputs = np.atleast_2d(inputs)
    if inputs.ndim != 2 or inputs.shape[1] != model.layer_dims[0]:
        raise UsageError(f"Expected inputs with {model.layer_dims[0]} features, got shape {np.shape(x)}")
    if not np.all(np.isfinite(inputs)):
        raise UsageError("Inputs contain NaN or Inf")
    return inputs, single


def _forward_layers(model: MlpModel, inputs: np.ndarray) -> List[np.ndarray]:
    """Activations per layer; the first is the input, the last the logits."""
    activations = [inputs]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = activations[-1] @ w + b
        activations.append(z if i == last else np.maximum(z, 0.0))
    return activations


def forward(model: MlpModel, x) -> np.ndarray:
    """Logits for one feature vector (d,) or a batch (N, d)."""
    inputs, single = _as_inputs(model, x)
    logits = _forward_layers(model, inputs)[-1]
    return logits[0] if single else logits


def backward(model: MlpModel, x, y, spec: LossSpec) -> Tuple[float, List[np.ndarray]]:
    """Mean loss over the batch and its gradients, ordered like MlpModel.parameters()."""
    inputs, _ = _as_inputs(model, x)
    labels = np.atleast_1d(np.asarray(y))
    activations = _forward_layers(model, inputs)
    out = batch_loss(spec, activations[-1], labels)

    grads: List[np.ndarray] = []
    delta = out.grad
    for i in range(len(model.weights) - 1, -1, -1):
        grad_w = activations[i].T @ delta
        grad_b = np.sum(delta, axis=0)
        grads[:0] = [grad_w, grad_b]
        if i > 0:
            delta = (delta @ model.weights[i].T) * (activations[i] > 0.0)
    return out.value, grads


def sgd_step(
    model: MlpModel,
    grads: List[np.ndarray],
    lr: float,
    momentum: float,
    velocity: Optional[List[np.ndarray]] = None,
) -> Tuple[MlpModel, List[np.ndarray]]:
    """Classical momentum: v <- momentum * v + g; theta <- theta - lr * v."""
    if lr <= 0:
        raise ConfigError(f"learning rate must be > 0, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ConfigError(f"momentum must lie in [0, 1), got {momentum}")
    params = model.parameters()
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise RuntimeError("Gradient shapes do not match model parameters")
    if velocity is None:
        velocity = [np.zeros_like(p) for p in params]
    new_velocity = [momentum * v + g for v, g in zip(velocity, grads)]
    updated = [p - lr * v for p, v in zip(params, new_velocity)]
    new_model = MlpModel(list(model.layer_dims), updated[0::2], updated[1::2])
    return new_model, new_velocity


def evaluate(model: MlpModel, dataset: Dataset) -> PredictionSet:
    if len(dataset) == 0:
        return PredictionSet(logits=np.empty((0, model.num_classes)), labels=np.empty(0, dtype=np.int64))
    if dataset.dim != model.layer_dims[0]:
        raise UsageError(f"Model expects {model.layer_dims[0]} features, dataset has {dataset.dim}")
    return PredictionSet(logits=forward(model, dataset.features), labels=dataset.labels.copy())


def train(config: TrainConfig, train_set: Dataset, val_set: Optional[Dataset] = None,
          model: Optional[MlpModel] = None) -> Tuple[MlpModel, TrainHistory]:
    """Mini-batch SGD. Reproducible from (config, data): init uses config.seed,
    each epoch's shuffle uses default_rng([seed, epoch])."""
    if len(train_set) == 0:
        raise UsageError("Training set is empty")
    if model is None:
        dims = [train_set.dim] + list(config.hidden_dims) + [train_set.num_classes]
        model = init_mlp(dims, config.seed)
    elif model.layer_dims[0] != train_set.dim or model.num_classes != train_set.num_classes:
        raise UsageError("Model shape does not match the training set")

    history = TrainHistory()
    velocity = None
    n = len(train_set)
    for epoch in range(config.epochs):
        lr = config.learning_rate(epoch)
        if config.shuffle:
            order = np.random.default_rng([config.seed, epoch]).permutation(n)
        else:
            order = np.arange(n)
        weighted_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            value, grads = backward(model, train_set.features[idx], train_set.labels[idx], config.loss)
            model, velocity = sgd_step(model, grads, lr, config.momentum, velocity)
            weighted_loss += value * idx.size
        record = EpochRecord(epoch=epoch, train_loss=weighted_loss / n, val_loss=float("nan"),
                             val_acc=float("nan"), val_ece=float("nan"), learning_rate=lr)
        if val_set is not None and len(val_set) > 0:
            preds = evaluate(model, val_set)
            record.val_loss = batch_loss(config.loss, preds.logits, preds.labels).value
            record.val_acc = accuracy(preds)
            record.val_ece = ece(preds)
        history.records.append(record)
        logger.debug("epoch %d lr=%g train_loss=%.5f val_loss=%.5f val_acc=%.4f val_ece=%.4f",
                     epoch, lr, record.train_loss, record.val_loss, record.val_acc, record.val_ece)
    return model, history


def save_checkpoint(model: MlpModel, path: Union[str, Path], config_digest: str = ""):
    document = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_dims": list(model.layer_dims),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "config_hash": config_digest,
        "init": INIT_RULE,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(document, f, sort_keys=True)
        f.write("\n")


def load_checkpoint(path: Union[str, Path]) -> Tuple[MlpModel, str]:
    """Returns the model and the stored config hash."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except FileNotFoundError:
        raise DataParseError("Checkpoint not found", path=str(path))
    except json.JSONDecodeError as e:
        raise DataParseError(f"Invalid checkpoint JSON: {e.msg}", path=str(path), line=e.lineno)
    if document.get("format") != CHECKPOINT_FORMAT or document.get("version") != CHECKPOINT_VERSION:
        raise DataParseError("Unsupported checkpoint format or version", path=str(path))
    try:
        model = MlpModel(
            layer_dims=[int(d) for d in document["layer_dims"]],
            weights=[np.asarray(w, dtype=np.float64) for w in document["weights"]],
            biases=[np.asarray(b, dtype=np.float64) for b in document["biases"]],
        )
    except (KeyError, ConfigError) as e:
        raise DataParseError(f"Malformed checkpoint: {e}", path=str(path))
    return model, document.get("config_hash", "")
