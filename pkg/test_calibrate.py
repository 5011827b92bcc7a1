"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026
"""

import numpy as np
import pytest

from calibrate import apply_temperature, fit_temperature, scale_logits, temperature_grid
from errors import DomainError, UsageError
from metrics import PredictionSet, accuracy


def test_scale_logits():
    np.testing.assert_allclose(scale_logits([2.0, 4.0], 2.0), [1.0, 2.0])
    np.testing.assert_array_equal(scale_logits([2.0, 4.0], 1.0), [2.0, 4.0])


@pytest.mark.parametrize("T", [0.0, -1.0, float("nan"), float("inf")])
def test_scale_logits_rejects_bad_temperature(T):
    with pytest.raises(DomainError):
        scale_logits([1.0, 0.0], T)


def test_grid_always_contains_one():
    grid = temperature_grid(0.15, 5.0, 0.1)
    assert 1.0 in grid
    assert grid == sorted(grid)
    assert grid[0] == 0.15 and grid[-1] <= 5.0


def test_grid_bounds_validated():
    with pytest.raises(UsageError):
        temperature_grid(1.5, 5.0, 0.1)
    with pytest.raises(UsageError):
        temperature_grid(0.1, 0.5, 0.1)
    with pytest.raises(UsageError):
        temperature_grid(0.1, 5.0, 0.0)


def test_overconfident_predictions_are_cooled(overconfident_preds):
    scaled, _ = overconfident_preds
    fit = fit_temperature(scaled)
    assert 2.5 <= fit.t_star <= 5.0
    assert fit.ece_post < fit.ece_pre
    assert fit.nll_post <= fit.nll_pre
    assert accuracy(apply_temperature(scaled, fit.t_star)) == accuracy(scaled)


def test_calibrated_predictions_keep_temperature_near_one(overconfident_preds):
    _, calibrated = overconfident_preds
    fit = fit_temperature(calibrated)
    assert abs(fit.t_star - 1.0) <= 0.2


def test_fit_reports_search_grid(overconfident_preds):
    fit = fit_temperature(overconfident_preds[0], t_min=0.5, t_max=2.0, resolution=0.5)
    assert (fit.t_min, fit.t_max, fit.resolution) == (0.5, 2.0, 0.5)
    assert fit.grid_size == 4
    assert "[0.5, 2]" in fit.search_grid


def test_ties_prefer_temperature_one():
    # Equal logits give the same NLL at every temperature
    preds = PredictionSet(logits=np.zeros((10, 3)), labels=np.arange(10) % 3)
    assert fit_temperature(preds).t_star == 1.0


def test_empty_validation_set():
    with pytest.raises(UsageError):
        fit_temperature(PredictionSet(logits=np.empty((0, 2)), labels=np.empty(0, dtype=int)))
