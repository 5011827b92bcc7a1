"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026

Post-hoc temperature scaling. A single temperature is fit on validation
predictions by grid search over NLL and then applied to test predictions.
"""

import logging
from typing import List

import numpy as np
from pydantic import BaseModel

from errors import DomainError, UsageError
from metrics import DEFAULT_ECE_BINS, PredictionSet, ece, nll
from numerics import as_logits

logger = logging.getLogger(__name__)

DEFAULT_T_MIN = 0.1
DEFAULT_T_MAX = 5.0
DEFAULT_RESOLUTION = 0.1


class TemperatureFit(BaseModel):
    t_star: float
    nll_pre: float
    nll_post: float
    ece_pre: float
    ece_post: float
    t_min: float
    t_max: float
    resolution: float
    grid_size: int

    @property
    def search_grid(self) -> str:
        return f"[{self.t_min:g}, {self.t_max:g}] step {self.resolution:g} plus 1.0 ({self.grid_size} points)"


def _check_temperature(T: float):
    if not np.isfinite(T) or T <= 0:
        raise DomainError(f"Temperature must be > 0, got {T}")


def scale_logits(l, T: float) -> np.ndarray:
    """l / T element-wise."""
    _check_temperature(T)
    logits = as_logits(l)
    if T == 1.0:
        return logits.copy()
    return logits / T


def apply_temperature(preds: PredictionSet, T: float) -> PredictionSet:
    _check_temperature(T)
    if len(preds) == 0:
        return PredictionSet(logits=preds.logits.copy(), labels=preds.labels.copy())
    return PredictionSet(logits=scale_logits(preds.logits, T), labels=preds.labels.copy())


def temperature_grid(t_min: float, t_max: float, resolution: float) -> List[float]:
    """{t_min, t_min + r, ..., <= t_max} together with 1.0, ascending."""
    if not (0 < t_min <= 1.0 <= t_max):
        raise UsageError(f"Temperature bounds must satisfy 0 < t_min <= 1 <= t_max, got [{t_min}, {t_max}]")
    if resolution <= 0:
        raise UsageError(f"Grid resolution must be > 0, got {resolution}")
    steps = int(np.floor((t_max - t_min) / resolution + 1e-9))
    grid = np.round(t_min + resolution * np.arange(steps + 1), 12)
    values = set(float(t) for t in grid)
    values.add(1.0)
    return sorted(values)


def fit_temperature(
    val: PredictionSet,
    t_min: float = DEFAULT_T_MIN,
    t_max: float = DEFAULT_T_MAX,
    resolution: float = DEFAULT_RESOLUTION,
    ece_bins: int = DEFAULT_ECE_BINS,
) -> TemperatureFit:
    """Grid-search the temperature that minimises validation NLL.

    Ties on NLL go to the temperature closest to 1, then the smallest one.
    """
    if len(val) == 0:
        raise UsageError("Cannot fit a temperature on an empty prediction set")
    grid = temperature_grid(t_min, t_max, resolution)
    losses = [nll(apply_temperature(val, t)) for t in grid]
    best = min(losses)
    candidates = [t for t, loss in zip(grid, losses) if loss == best]
    t_star = min(candidates, key=lambda t: (abs(t - 1.0), t))

    nll_pre = losses[grid.index(1.0)]
    scaled = apply_temperature(val, t_star)
    fit = TemperatureFit(
        t_star=t_star,
        nll_pre=nll_pre,
        nll_post=best,
        ece_pre=ece(val, ece_bins),
        ece_post=ece(scaled, ece_bins),
        t_min=t_min,
        t_max=t_max,
        resolution=resolution,
        grid_size=len(grid),
    )
    logger.debug("Temperature fit: T=%.3f, NLL %.5f -> %.5f over %d grid points",
                 t_star, fit.nll_pre, fit.nll_post, len(grid))
    return fit
