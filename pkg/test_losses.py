"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import ConfigError, DomainError, UsageError
from losses import (
    LossKind,
    LossSpec,
    batch_loss,
    ce,
    ecp,
    evaluate,
    fl,
    flsd,
    ls,
    margin_penalty,
    mbls,
    penalty_profile,
)
from numerics import entropy, kl_to_uniform, kl_uniform_to, softmax
from verification import GRADIENT_SPECS, near_kink, numeric_logit_grad, relative_error


def test_ce_uniform_logits():
    out = ce([0.0, 0.0, 0.0, 0.0], 2)
    assert out.value == pytest.approx(np.log(4))
    np.testing.assert_allclose(out.grad, [0.25, 0.25, -0.75, 0.25])


def test_ce_saturated_is_finite():
    out = ce([1000.0, 0.0], 1)
    assert out.value == pytest.approx(1000.0)
    np.testing.assert_allclose(out.grad, [1.0, -1.0])


def test_label_out_of_range():
    with pytest.raises(UsageError):
        ce([1.0, 2.0], 2)
    with pytest.raises(UsageError):
        ce([1.0, 2.0], -1)


def test_non_finite_logits():
    with pytest.raises(DomainError):
        ce([np.nan, 1.0], 0)


def test_ls_with_zero_alpha_is_ce():
    l = np.array([1.0, -2.0, 0.5])
    assert ls(l, 0, 0.0).value == pytest.approx(ce(l, 0).value)
    np.testing.assert_allclose(ls(l, 0, 0.0).grad, ce(l, 0).grad)


def test_ls_decomposes_into_ce_and_kl():
    rng = np.random.default_rng(11)
    for _ in range(50):
        l = rng.normal(0, 3, size=6)
        y = int(rng.integers(6))
        alpha = 0.1
        expected = (1 - alpha) * ce(l, y).value + alpha * kl_uniform_to(softmax(l)) + alpha * np.log(6)
        assert ls(l, y, alpha).value == pytest.approx(expected, abs=1e-9)


def test_ls_alpha_bounds():
    with pytest.raises(ConfigError):
        ls([0.0, 1.0], 0, 1.0)
    with pytest.raises(ConfigError):
        ls([0.0, 1.0], 0, -0.1)


def test_fl_gamma_zero_is_ce():
    l = np.array([0.3, 2.0, -1.0])
    assert fl(l, 1, 0.0).value == pytest.approx(ce(l, 1).value)
    np.testing.assert_allclose(fl(l, 1, 0.0).grad, ce(l, 1).grad)


def test_fl_confident_correct_is_near_zero():
    out = fl([30.0, 0.0, 0.0], 0, 3.0)
    assert 0.0 <= out.value < 1e-30
    assert np.all(np.isfinite(out.grad))


@given(st.integers(2, 20), st.sampled_from([1.0, 2.0, 3.0, 5.0]), st.integers(0, 10_000))
@settings(max_examples=200)
def test_fl_lower_bound(k, gamma, seed):
    rng = np.random.default_rng(seed)
    l = rng.normal(0, 3, size=k)
    y = int(rng.integers(k))
    bound = ce(l, y).value - gamma * entropy(softmax(l))
    assert fl(l, y, gamma).value >= bound - 1e-9


def test_flsd_switches_gamma_on_threshold():
    spec = LossSpec(kind="flsd")
    low_p = np.array([0.0, 3.0, 3.0])   # s_0 well below 0.2
    high_p = np.array([3.0, 0.0, 0.0])  # s_0 above 0.2
    assert flsd(low_p, 0, spec).value == pytest.approx(fl(low_p, 0, 5.0).value)
    assert flsd(high_p, 0, spec).value == pytest.approx(fl(high_p, 0, 3.0).value)


def test_ecp_is_ce_minus_weighted_entropy():
    l = np.array([1.0, 0.0, -1.0])
    expected = ce(l, 2).value - 0.1 * entropy(softmax(l))
    assert ecp(l, 2, 0.1).value == pytest.approx(expected)


def test_mbls_inactive_inside_margin():
    l = np.array([5.0, 2.0, 0.0])
    out = mbls(l, 0, margin=6.0, lambda_=0.1)
    assert out.value == pytest.approx(ce(l, 0).value)
    np.testing.assert_allclose(out.grad, ce(l, 0).grad)


def test_mbls_penalises_distances_beyond_margin():
    l = np.array([10.0, 0.0, 9.0])
    out = mbls(l, 0, margin=6.0, lambda_=0.1)
    assert out.value == pytest.approx(ce(l, 0).value + 0.1 * 4.0)
    expected = ce(l, 0).grad + np.array([0.1, -0.1, 0.0])
    np.testing.assert_allclose(out.grad, expected)


def test_mbls_hinge_inactive_exactly_at_margin():
    l = np.array([6.0, 0.0])
    out = mbls(l, 0, margin=6.0, lambda_=0.1)
    assert out.value == pytest.approx(ce(l, 0).value)


def test_mbls_tied_winner_gets_penalty_gradient():
    l = np.array([10.0, 10.0, 0.0])
    out = mbls(l, 2, margin=2.0, lambda_=0.1)
    penalty = out.grad - ce(l, 2).grad
    np.testing.assert_allclose(penalty, [0.1, 0.0, -0.1])


def test_mbls_rejects_negative_settings():
    with pytest.raises(ConfigError):
        mbls([1.0, 0.0], 0, margin=-1.0)
    with pytest.raises(ConfigError):
        mbls([1.0, 0.0], 0, lambda_=-0.1)


def test_mbls_penalty_worked_example():
    # distances [0, 4, 5] against margin 2
    values, grads = margin_penalty(np.array([[5.0, 1.0, 0.0]]), margin=2.0, weight=0.1)
    assert values[0] == pytest.approx(0.5)
    np.testing.assert_allclose(grads[0], [0.2, -0.1, -0.1])
    l = np.array([5.0, 1.0, 0.0])
    out = mbls(l, 1, margin=2.0, lambda_=0.1)
    assert out.value == pytest.approx(ce(l, 1).value + 0.5)
    np.testing.assert_allclose(out.grad - ce(l, 1).grad, [0.2, -0.1, -0.1])


@given(
    st.lists(st.floats(-20, 20, allow_nan=False), min_size=2, max_size=8),
    st.floats(0, 40),
    st.floats(0, 40),
)
@settings(max_examples=300)
def test_margin_penalty_non_increasing_in_margin(l, m1, m2):
    logits = np.array([l])
    low, high = sorted((m1, m2))
    at_low, _ = margin_penalty(logits, low, 0.1)
    at_high, _ = margin_penalty(logits, high, 0.1)
    assert at_high[0] <= at_low[0] + 1e-12
    largest_gap = logits.max() - logits.min()
    at_gap, grads = margin_penalty(logits, largest_gap, 0.1)
    assert at_gap[0] == 0.0
    assert not grads.any()


@given(st.integers(2, 20), st.floats(0, 2), st.integers(0, 10_000))
@settings(max_examples=200)
def test_ecp_equals_ce_plus_kl_to_uniform(k, weight, seed):
    rng = np.random.default_rng(seed)
    l = rng.normal(0, 3, size=k)
    y = int(rng.integers(k))
    s = softmax(l)
    expected = ce(l, y).value + weight * kl_to_uniform(s) - weight * np.log(k)
    assert ecp(l, y, weight).value == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("name", sorted(GRADIENT_SPECS))
def test_logit_gradients_match_finite_differences(name):
    spec = GRADIENT_SPECS[name]
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 100:
        k = int(rng.integers(2, 51))
        logits = rng.normal(0, 3, size=(1, k))
        labels = rng.integers(0, k, size=1)
        if near_kink(spec, logits, labels)[0]:
            continue
        analytic = evaluate(spec, logits, labels).grad
        numeric = numeric_logit_grad(spec, logits, labels)
        assert relative_error(analytic, numeric)[0] <= 1e-5
        checked += 1


def test_batch_evaluation_matches_rows():
    rng = np.random.default_rng(2)
    logits = rng.normal(0, 2, size=(8, 4))
    labels = rng.integers(0, 4, size=8)
    for spec in GRADIENT_SPECS.values():
        batch = evaluate(spec, logits, labels)
        for i in range(8):
            row = evaluate(spec, logits[i], int(labels[i]))
            assert batch.value[i] == pytest.approx(row.value)
            np.testing.assert_allclose(batch.grad[i], row.grad)


def test_batch_loss_is_mean():
    logits = np.array([[2.0, 0.0], [0.0, 1.0]])
    labels = np.array([0, 0])
    out = batch_loss(LossSpec(), logits, labels)
    assert out.value == pytest.approx(np.mean(ce(logits, labels).value))
    np.testing.assert_allclose(out.grad, ce(logits, labels).grad / 2)


def test_batch_loss_rejects_empty_and_mismatch():
    with pytest.raises(UsageError):
        batch_loss(LossSpec(), np.empty((0, 3)), np.empty(0, dtype=int))
    with pytest.raises(UsageError):
        batch_loss(LossSpec(), np.zeros((2, 3)), np.array([0]))


def test_loss_spec_accepts_lambda_alias_and_lowercase_kind():
    spec = LossSpec.model_validate({"kind": "mbls", "margin": 10, "lambda": 0.2})
    assert spec.kind == LossKind.MBLS
    assert spec.lambda_ == 0.2
    assert spec.describe() == "MBLS(m=10, lambda=0.2)"


def test_loss_spec_rejects_unknown_fields():
    with pytest.raises(ValueError):
        LossSpec.model_validate({"kind": "CE", "temperature": 2})
    with pytest.raises(ValueError):
        LossSpec.model_validate({"kind": "LS", "alpha": 1.5})


def test_penalty_profile():
    linear, linear_grad, hinge, hinge_grad = penalty_profile([0.0, 2.0, 6.0, 8.0], margin=6.0, weight=0.5)
    np.testing.assert_allclose(linear, [0.0, 1.0, 3.0, 4.0])
    np.testing.assert_allclose(linear_grad, [0.5] * 4)
    np.testing.assert_allclose(hinge, [0.0, 0.0, 0.0, 1.0])
    np.testing.assert_allclose(hinge_grad, [0.0, 0.0, 0.0, 0.5])
    with pytest.raises(ConfigError):
        penalty_profile([-1.0], margin=1.0)
