"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 17, 2026

Training objectives evaluated at the logit level, each returning the loss
value together with its analytic gradient with respect to the logits.

Single samples take logits of shape (K,) and an integer label; batches take
(N, K) logits and (N,) labels and return per-sample values (N,) and
gradients (N, K). `batch_loss` reduces a batch to its mean.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from errors import ConfigError, UsageError
from numerics import _entropy, _log_softmax, _logit_distances, as_logits

logger = logging.getLogger(__name__)


class LossKind(str, Enum):
    CE = "CE"
    LS = "LS"
    FL = "FL"
    FLSD = "FLSD"
    ECP = "ECP"
    MBLS = "MBLS"


class LossSpec(BaseModel):
    """Loss selection plus the hyperparameters each kind reads."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    kind: LossKind = LossKind.CE
    alpha: float = Field(0.05, ge=0.0, lt=1.0)
    gamma: float = Field(3.0, ge=0.0)
    gamma_low: float = Field(3.0, ge=0.0)
    gamma_high: float = Field(5.0, ge=0.0)
    threshold: float = Field(0.2, gt=0.0, lt=1.0)
    ecp_weight: float = Field(0.1, ge=0.0)
    margin: float = Field(6.0, ge=0.0)
    lambda_: float = Field(0.1, ge=0.0, alias="lambda")

    @model_validator(mode="before")
    @classmethod
    def _normalize_kind(cls, values):
        if isinstance(values, dict) and isinstance(values.get("kind"), str):
            values = dict(values)
            values["kind"] = values["kind"].upper()
        return values

    def describe(self) -> str:
        """Short human label, e.g. 'MBLS(m=6, lambda=0.1)'."""
        if self.kind == LossKind.LS:
            return f"LS(alpha={self.alpha:g})"
        if self.kind == LossKind.FL:
            return f"FL(gamma={self.gamma:g})"
        if self.kind == LossKind.FLSD:
            return f"FLSD(gamma={self.gamma_high:g}/{self.gamma_low:g}@{self.threshold:g})"
        if self.kind == LossKind.ECP:
            return f"ECP(weight={self.ecp_weight:g})"
        if self.kind == LossKind.MBLS:
            return f"MBLS(m={self.margin:g}, lambda={self.lambda_:g})"
        return "CE"


@dataclass
class LossOutput:
    value: Union[float, np.ndarray]
    grad: np.ndarray


def _prepare(l, y) -> Tuple[np.ndarray, np.ndarray, bool]:
    logits = as_logits(l)
    single = logits.ndim == 1
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(np.asarray(y))
    if not np.issubdtype(labels.dtype, np.integer):
        if np.all(np.mod(labels, 1) == 0):
            labels = labels.astype(np.int64)
        else:
            raise UsageError("Labels must be integer class indices")
    if labels.shape != (logits.shape[0],):
        raise UsageError(f"Got {labels.size} labels for {logits.shape[0]} logit vectors")
    num_classes = logits.shape[1]
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise UsageError(f"Labels must lie in [0, {num_classes})")
    return logits, labels, single


def _finish(values: np.ndarray, grads: np.ndarray, single: bool) -> LossOutput:
    if single:
        return LossOutput(value=float(values[0]), grad=grads[0])
    return LossOutput(value=values, grad=grads)


def _rows(labels: np.ndarray) -> np.ndarray:
    return np.arange(labels.shape[0])


def ce(l, y) -> LossOutput:
    """Cross-entropy: -log s_y, gradient s - onehot(y)."""
    logits, labels, single = _prepare(l, y)
    log_probs = _log_softmax(logits)
    rows = _rows(labels)
    values = -log_probs[rows, labels]
    grads = np.exp(log_probs)
    grads[rows, labels] -= 1.0
    return _finish(values, grads, single)


def ls(l, y, alpha: float = 0.05) -> LossOutput:
    """Label smoothing: cross-entropy against (1 - alpha) * y + alpha / K."""
    if not 0.0 <= alpha < 1.0:
        raise ConfigError(f"alpha must lie in [0, 1), got {alpha}")
    logits, labels, single = _prepare(l, y)
    num_classes = logits.shape[1]
    log_probs = _log_softmax(logits)
    rows = _rows(labels)
    values = (1.0 - alpha) * -log_probs[rows, labels] - (alpha / num_classes) * np.sum(log_probs, axis=1)
    grads = np.exp(log_probs) - alpha / num_classes
    grads[rows, labels] -= 1.0 - alpha
    return _finish(values, grads, single)


def _focal(logits: np.ndarray, labels: np.ndarray, gammas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    log_probs = _log_softmax(logits)
    probs = np.exp(log_probs)
    rows = _rows(labels)
    log_p = log_probs[rows, labels]
    p = np.exp(log_p)
    # 1 - p without cancellation when p is close to 1
    q = -np.expm1(log_p)
    modulating = np.power(q, gammas)
    values = -modulating * log_p

    # d value / d p = gamma q^(gamma-1) log p - q^gamma / p, and d p / d l_k = p (delta_ky - s_k)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(
            (gammas > 0.0) & (q > 0.0),
            gammas * np.power(q, gammas - 1.0) * p * log_p,
            0.0,
        )
    factor = slope - modulating
    direction = -probs
    direction[rows, labels] += 1.0
    grads = factor[:, None] * direction
    return values, grads


def fl(l, y, gamma: float = 3.0) -> LossOutput:
    """Focal loss -(1 - s_y)^gamma log s_y."""
    if gamma < 0:
        raise ConfigError(f"gamma must be >= 0, got {gamma}")
    logits, labels, single = _prepare(l, y)
    gammas = np.full(labels.shape[0], float(gamma))
    values, grads = _focal(logits, labels, gammas)
    return _finish(values, grads, single)


def flsd_gammas(logits: np.ndarray, labels: np.ndarray, gamma_low: float, gamma_high: float,
                threshold: float) -> np.ndarray:
    """Per-sample gamma: gamma_high below the threshold on s_y, gamma_low otherwise."""
    p = np.exp(_log_softmax(logits)[_rows(labels), labels])
    return np.where(p < threshold, float(gamma_high), float(gamma_low))


def flsd(l, y, spec: LossSpec = None) -> LossOutput:
    """Sample-dependent focal loss. The gamma switch is constant in the backward pass."""
    spec = spec or LossSpec(kind=LossKind.FLSD)
    if not 0.0 < spec.threshold < 1.0:
        raise ConfigError(f"threshold must lie in (0, 1), got {spec.threshold}")
    if spec.gamma_low < 0 or spec.gamma_high < 0:
        raise ConfigError("FLSD gammas must be >= 0")
    logits, labels, single = _prepare(l, y)
    gammas = flsd_gammas(logits, labels, spec.gamma_low, spec.gamma_high, spec.threshold)
    values, grads = _focal(logits, labels, gammas)
    return _finish(values, grads, single)


def ecp(l, y, weight: float = 0.1) -> LossOutput:
    """Explicit confidence penalty: CE - weight * H(s)."""
    if weight < 0:
        raise ConfigError(f"ECP weight must be >= 0, got {weight}")
    logits, labels, single = _prepare(l, y)
    log_probs = _log_softmax(logits)
    probs = np.exp(log_probs)
    rows = _rows(labels)
    ent = _entropy(probs)
    ent = np.atleast_1d(ent)
    values = -log_probs[rows, labels] - weight * ent
    # dH/dl_k = -s_k (log s_k + H)
    grads = probs + weight * probs * (log_probs + ent[:, None])
    grads[rows, labels] -= 1.0
    return _finish(values, grads, single)


def margin_penalty(logits: np.ndarray, margin: float, weight: float) -> Tuple[np.ndarray, np.ndarray]:
    """weight * sum_k max(0, d_k - margin) per row, with its subgradient.

    The max is routed to the lowest argmax index; the hinge is inactive at d_k == margin.
    """
    distances = _logit_distances(logits)
    excess = distances - margin
    active = excess > 0.0
    values = weight * np.sum(np.where(active, excess, 0.0), axis=1)
    grads = np.where(active, -weight, 0.0)
    winners = np.argmax(logits, axis=1)
    rows = np.arange(logits.shape[0])
    grads[rows, winners] += weight * np.sum(active, axis=1)
    return values, grads


def mbls(l, y, margin: float = 6.0, lambda_: float = 0.1) -> LossOutput:
    """Margin-based label smoothing: CE + lambda * sum_k max(0, d_k - margin)."""
    if margin < 0:
        raise ConfigError(f"margin must be >= 0, got {margin}")
    if lambda_ < 0:
        raise ConfigError(f"lambda must be >= 0, got {lambda_}")
    logits, labels, single = _prepare(l, y)
    base = ce(logits, labels)
    penalty, penalty_grads = margin_penalty(logits, margin, lambda_)
    return _finish(base.value + penalty, base.grad + penalty_grads, single)


def evaluate(spec: LossSpec, l, y) -> LossOutput:
    """Dispatch on spec.kind."""
    if spec.kind == LossKind.CE:
        return ce(l, y)
    if spec.kind == LossKind.LS:
        return ls(l, y, spec.alpha)
    if spec.kind == LossKind.FL:
        return fl(l, y, spec.gamma)
    if spec.kind == LossKind.FLSD:
        return flsd(l, y, spec)
    if spec.kind == LossKind.ECP:
        return ecp(l, y, spec.ecp_weight)
    if spec.kind == LossKind.MBLS:
        return mbls(l, y, spec.margin, spec.lambda_)
    raise ConfigError(f"Unknown loss kind: {spec.kind}")


def batch_loss(spec: LossSpec, logits: Sequence, labels: Sequence) -> LossOutput:
    """Mean loss over a batch; gradients are per sample and already divided by N."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2 or logits.shape[0] == 0:
        raise UsageError("batch_loss needs a non-empty (N, K) batch")
    if labels.shape != (logits.shape[0],):
        raise UsageError(f"Got {labels.size} labels for {logits.shape[0]} samples")
    per_sample = evaluate(spec, logits, labels)
    # np.sum over a 1-D float64 array reduces in a fixed order for a given N
    value = float(np.sum(per_sample.value) / logits.shape[0])
    return LossOutput(value=value, grad=per_sample.grad / logits.shape[0])


def penalty_profile(distances: Sequence[float], margin: float, weight: float = 1.0):
    """Linear and margin penalties of a logit distance, with their derivatives in d.

    Returns (linear, linear_grad, hinge, hinge_grad) arrays matching `distances`.
    """
    if margin < 0 or weight < 0:
        raise ConfigError("margin and weight must be >= 0")
    d = np.asarray(distances, dtype=np.float64)
    if np.any(d < 0):
        raise ConfigError("Logit distances are non-negative")
    linear = weight * d
    linear_grad = np.full_like(d, weight)
    hinge = weight * np.maximum(0.0, d - margin)
    hinge_grad = np.where(d > margin, weight, 0.0)
    return linear, linear_grad, hinge, hinge_grad
