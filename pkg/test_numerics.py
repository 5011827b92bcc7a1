"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from errors import ContractError, DomainError
from numerics import (
    check_logit_bound,
    entropy,
    kl_to_uniform,
    kl_uniform_to,
    log_softmax,
    logit_distances,
    logsumexp,
    bound_sides,
    softmax,
)

logit_vectors = st.integers(2, 30).flatmap(
    lambda k: arrays(np.float64, k, elements=st.floats(-50, 50, allow_nan=False, allow_infinity=False))
)


def test_logsumexp_large_values():
    assert logsumexp([1000.0, 1000.0]) == pytest.approx(1000.0 + np.log(2.0))
    assert logsumexp([-1000.0, -1000.0]) == pytest.approx(-1000.0 + np.log(2.0))


def test_logsumexp_extreme_magnitudes():
    assert logsumexp([1e300, -1e300, 0.0]) == 1e300
    assert logsumexp([-1e300, -1e300]) == pytest.approx(-1e300)


@given(st.integers(2, 30).flatmap(
    lambda k: arrays(np.float64, k, elements=st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False))
))
@settings(max_examples=300)
def test_logsumexp_between_max_and_max_plus_log_k(l):
    result = logsumexp(l)
    top = l.max()
    assert np.isfinite(result)
    assert top <= result <= top + np.log(len(l)) + 1e-12 * max(1.0, abs(top))


def test_softmax_saturates_without_overflow():
    s = softmax([1000.0, 0.0])
    assert np.all(np.isfinite(s))
    assert s[0] == pytest.approx(1.0)
    assert log_softmax([1000.0, 0.0])[1] == pytest.approx(-1000.0)


def test_softmax_batch_rows_sum_to_one():
    batch = np.random.default_rng(0).normal(0, 5, size=(50, 7))
    np.testing.assert_allclose(softmax(batch).sum(axis=1), 1.0, atol=1e-12)


def test_non_finite_logits_rejected():
    with pytest.raises(DomainError):
        softmax([np.nan, 0.0])
    with pytest.raises(DomainError):
        logsumexp([np.inf, 0.0])
    with pytest.raises(DomainError):
        softmax([1.0])


@given(logit_vectors, st.floats(-100, 100))
def test_softmax_shift_invariant(l, c):
    np.testing.assert_allclose(softmax(l + c), softmax(l), atol=1e-12)


def test_entropy_extremes():
    assert entropy([1.0, 0.0, 0.0]) == 0.0
    assert entropy(np.full(8, 1 / 8)) == pytest.approx(np.log(8))


def test_entropy_rejects_off_simplex():
    with pytest.raises(ContractError):
        entropy([0.5, 0.6])
    with pytest.raises(ContractError):
        entropy([-0.1, 1.1])


def test_kl_uniform_to_uniform_is_zero():
    assert kl_uniform_to(np.full(4, 0.25)) == pytest.approx(0.0, abs=1e-15)


def test_kl_uniform_to_zero_entry_is_domain_error():
    with pytest.raises(DomainError):
        kl_uniform_to([1.0, 0.0])


def test_kl_to_uniform_matches_entropy():
    s = np.array([0.7, 0.2, 0.1])
    assert kl_to_uniform(s) == pytest.approx(np.log(3) - entropy(s))
    assert kl_to_uniform([1.0, 0.0]) == pytest.approx(np.log(2))


def test_logit_distances():
    np.testing.assert_array_equal(logit_distances([3.0, 1.0, 3.0]), [0.0, 2.0, 0.0])
    np.testing.assert_array_equal(logit_distances([2.0, 2.0]), [0.0, 0.0])


def test_check_logit_bound_two_class_example():
    report = check_logit_bound([10.0, 0.0])
    assert report.mean_distance == 5.0
    assert report.lower_ok and report.upper_ok
    # upper slack is LSE(l) - max(l), lower slack is log K minus that
    assert report.slack_upper == pytest.approx(np.log1p(np.exp(-10.0)), rel=1e-9)
    assert report.slack_lower == pytest.approx(np.log(2) - np.log1p(np.exp(-10.0)), rel=1e-9)


def test_check_logit_bound_equal_logits_is_tight_below():
    report = check_logit_bound(np.zeros(5))
    assert report.mean_distance == 0.0
    assert report.kl_uniform == pytest.approx(0.0, abs=1e-15)
    assert report.slack_upper == pytest.approx(np.log(5))


def test_check_logit_bound_rejects_bad_input():
    with pytest.raises(DomainError):
        check_logit_bound([1.0, 2.0], tolerance=-1.0)
    with pytest.raises(DomainError):
        check_logit_bound(np.zeros((2, 3)))


@given(logit_vectors)
@settings(max_examples=300)
def test_distance_sandwich(l):
    report = check_logit_bound(l)
    assert report.lower_ok
    assert report.upper_ok


def test_bound_sides_batch_matches_single():
    batch = np.random.default_rng(3).normal(0, 3, size=(20, 6))
    mean_d, kl = bound_sides(batch)
    for i, row in enumerate(batch):
        report = check_logit_bound(row)
        assert mean_d[i] == pytest.approx(report.mean_distance)
        assert kl[i] == pytest.approx(report.kl_uniform)
