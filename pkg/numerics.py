"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 17, 2026

Numerically stable primitives over logit and probability vectors.

Every function works on a single vector of shape (K,) or on a batch of
shape (N, K); the class axis is always the last one. All arithmetic is
float64.
"""

import logging
from typing import Union

import numpy as np
from pydantic import BaseModel

from errors import ContractError, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, list, tuple]

SIMPLEX_TOLERANCE = 1e-6


class BoundReport(BaseModel):
    """Both sides of the logit-distance / KL(u||s) sandwich for one logit vector."""

    mean_distance: float
    kl_uniform: float
    lower_ok: bool
    upper_ok: bool
    slack_lower: float
    slack_upper: float


def as_logits(values: ArrayLike) -> np.ndarray:
    """Validate and convert logits to a float64 array with K >= 2."""
    logits = np.asarray(values, dtype=np.float64)
    if logits.ndim not in (1, 2):
        raise DomainError(f"Logits must be a vector or a batch of vectors, got shape {logits.shape}")
    if logits.shape[-1] < 2:
        raise DomainError(f"Logit vectors need at least 2 classes, got {logits.shape[-1]}")
    if not np.all(np.isfinite(logits)):
        raise DomainError("Logits contain NaN or Inf")
    return logits


def as_probabilities(values: ArrayLike) -> np.ndarray:
    """Validate a probability vector (or batch) against the simplex."""
    probs = np.asarray(values, dtype=np.float64)
    if probs.ndim not in (1, 2) or probs.shape[-1] < 1:
        raise ContractError(f"Probabilities must be a vector or a batch of vectors, got shape {probs.shape}")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0.0) or np.any(probs > 1.0):
        raise ContractError("Probabilities must lie in [0, 1]")
    deviation = np.abs(probs.sum(axis=-1) - 1.0)
    if np.any(deviation > SIMPLEX_TOLERANCE):
        raise ContractError(f"Probabilities do not sum to 1 (max deviation {float(np.max(deviation)):.3g})")
    return probs


def logsumexp(l: ArrayLike) -> Union[float, np.ndarray]:
    """log(sum(exp(l))) with the max-shift trick."""
    logits = as_logits(l)
    return _logsumexp(logits)


def _logsumexp(logits: np.ndarray) -> Union[float, np.ndarray]:
    top = np.max(logits, axis=-1, keepdims=True)
    result = np.squeeze(top, axis=-1) + np.log(np.sum(np.exp(logits - top), axis=-1))
    return float(result) if np.ndim(result) == 0 else result


def log_softmax(l: ArrayLike) -> np.ndarray:
    logits = as_logits(l)
    return _log_softmax(logits)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    top = np.max(logits, axis=-1, keepdims=True)
    shifted = logits - top
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def softmax(l: ArrayLike) -> np.ndarray:
    """Softmax probabilities; shift invariant and strictly positive for moderate logit gaps."""
    logits = as_logits(l)
    return _softmax(logits)


def _softmax(logits: np.ndarray) -> np.ndarray:
    exps = np.exp(logits - np.max(logits, axis=-1, keepdims=True))
    return exps / np.sum(exps, axis=-1, keepdims=True)


def entropy(s: ArrayLike) -> Union[float, np.ndarray]:
    """Shannon entropy in nats, with 0 log 0 = 0."""
    probs = as_probabilities(s)
    return _entropy(probs)


def _entropy(probs: np.ndarray) -> Union[float, np.ndarray]:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0.0, probs * np.log(np.where(probs > 0.0, probs, 1.0)), 0.0)
    result = -np.sum(terms, axis=-1)
    result = np.maximum(result, 0.0)
    return float(result) if np.ndim(result) == 0 else result


def kl_uniform_to(s: ArrayLike) -> Union[float, np.ndarray]:
    """KL(u || s) = -log K - mean_k log s_k. Rejects exact zeros."""
    probs = as_probabilities(s)
    if np.any(probs == 0.0):
        raise DomainError("KL(u || s) is infinite when s has a zero entry")
    return _kl_uniform_from_log(np.log(probs))


def _kl_uniform_from_log(log_probs: np.ndarray) -> Union[float, np.ndarray]:
    num_classes = log_probs.shape[-1]
    result = -np.log(num_classes) - np.mean(log_probs, axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def kl_to_uniform(s: ArrayLike) -> Union[float, np.ndarray]:
    """KL(s || u) = log K - H(s)."""
    probs = as_probabilities(s)
    result = np.log(probs.shape[-1]) - _entropy(probs)
    return float(result) if np.ndim(result) == 0 else result


def logit_distances(l: ArrayLike) -> np.ndarray:
    """d_k = max_j l_j - l_k. Tied winners all get distance 0."""
    logits = as_logits(l)
    return _logit_distances(logits)


def _logit_distances(logits: np.ndarray) -> np.ndarray:
    return np.max(logits, axis=-1, keepdims=True) - logits


def bound_sides(l: ArrayLike):
    """Return (mean_distance, kl_uniform) for each logit vector.

    KL(u || s) is evaluated from log-softmax, so saturated probabilities
    never turn the comparison into inf.
    """
    logits = as_logits(l)
    mean_distance = np.mean(_logit_distances(logits), axis=-1)
    kl_uniform = _kl_uniform_from_log(_log_softmax(logits))
    return mean_distance, kl_uniform


def check_logit_bound(l: ArrayLike, tolerance: float = 1e-9) -> BoundReport:
    """Check KL(u||s) <= mean(d(l)) <= KL(u||s) + log K for one logit vector."""
    if tolerance < 0:
        raise DomainError(f"tolerance must be >= 0, got {tolerance}")
    logits = as_logits(l)
    if logits.ndim != 1:
        raise DomainError("check_logit_bound takes a single logit vector; use bound_sides for batches")
    mean_distance, kl_uniform = bound_sides(logits)
    mean_distance = float(mean_distance)
    kl_uniform = float(kl_uniform)
    slack_lower = mean_distance - kl_uniform
    slack_upper = kl_uniform + float(np.log(logits.shape[-1])) - mean_distance
    return BoundReport(
        mean_distance=mean_distance,
        kl_uniform=kl_uniform,
        lower_ok=slack_lower >= -tolerance,
        upper_ok=slack_upper >= -tolerance,
        slack_lower=slack_lower,
        slack_upper=slack_upper,
    )
