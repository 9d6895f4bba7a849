import csv
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gandetect.imagecore import InvalidInputError
from gandetect.metrics import (
    ScoreSet, accuracy_at, auc, auc_pairwise, far_threshold, pd_at_far, roc_curve, summarize, trapezoid_area,
    write_roc_csv,
)

scores = st.lists(st.integers(-5, 5).map(float) | st.floats(-10, 10), min_size=1, max_size=60)


def test_auc_examples():
    assert auc(ScoreSet([1, 1], [0, 0])) == 1.0
    assert auc(ScoreSet([0.5, 0.5], [0.5, 0.5])) == 0.5
    assert auc(ScoreSet([0.9, 0.4], [0.5, 0.1])) == 0.75


def test_empty_or_nonfinite_rejected():
    with pytest.raises(InvalidInputError):
        ScoreSet([], [1.0])
    with pytest.raises(InvalidInputError):
        ScoreSet([np.inf], [1.0])


def test_auc_equals_pairwise_oracle():
    for seed in range(50):
        r = np.random.default_rng(seed)
        n_p, n_n = r.integers(1, 201, 2)
        # coarse rounding forces plenty of ties
        s = ScoreSet(np.round(r.normal(0.3, 1, n_p), 1), np.round(r.normal(0, 1, n_n), 1))
        assert auc(s) == auc_pairwise(s)


@given(scores, scores)
@settings(max_examples=80, deadline=None)
def test_auc_properties(p, n):
    s = ScoreSet(p, n)
    a = auc(s)
    assert a == auc_pairwise(s)
    assert a == pytest.approx(1 - auc(ScoreSet(n, p)), abs=1e-12)
    # scaling by a power of two is strictly increasing in floating point too
    assert auc(ScoreSet(8.0 * np.array(p), 8.0 * np.array(n))) == a
    assert trapezoid_area(roc_curve(s)) == pytest.approx(a, abs=1e-12)


def test_accuracy_examples():
    assert accuracy_at(ScoreSet([1.0], [0.0]), 0.5) == 1.0
    assert accuracy_at(ScoreSet([0.5, 0.5, 0.5], [0.5]), 0.5) == 0.25
    assert accuracy_at(ScoreSet([0.6, 0.4], [0.7, 0.2]), 0.5) == 0.5


def test_far_threshold_example():
    neg = np.arange(100) / 100
    t = far_threshold(neg, 0.05)
    assert t == 0.94
    assert np.mean(neg > t) == 0.05


@given(st.lists(st.integers(0, 30).map(float), min_size=1, max_size=80), st.floats(0.001, 0.999))
@settings(max_examples=80, deadline=None)
def test_far_threshold_is_conservative_and_minimal(neg, far):
    neg = np.array(neg)
    t = far_threshold(neg, far)
    assert t in neg
    assert np.sum(neg > t) <= far * neg.size
    smaller = neg[neg < t]
    # every smaller candidate would exceed the target
    assert all(np.sum(neg > c) > far * neg.size for c in smaller)


def test_pd_examples():
    s = ScoreSet(np.linspace(2, 3, 50), np.linspace(0, 1, 50))
    with pytest.warns(RuntimeWarning):
        assert pd_at_far(s, 0.01) == 1.0
    assert pd_at_far(s, 0.05) == 1.0
    with pytest.raises(InvalidInputError):
        pd_at_far(s, 0.0)


def test_pd_under_null_hypothesis():
    for seed in range(20):
        r = np.random.default_rng(seed)
        assert 0.02 <= pd_at_far(ScoreSet(r.normal(size=1000), r.normal(size=1000)), 0.05) <= 0.09


@given(scores, scores)
@settings(max_examples=40, deadline=None)
def test_pd_monotone_in_far(p, n):
    s = ScoreSet(p, n)
    fars = [0.01, 0.05, 0.1, 0.3, 0.6, 0.9]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        values = [pd_at_far(s, f) for f in fars]
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_roc_shape():
    s = ScoreSet([0.9, 0.4, 0.4], [0.5, 0.1])
    pts = roc_curve(s)
    assert pts[0] == (0.0, 0.0) and pts[-1] == (1.0, 1.0)
    far, pd = zip(*pts)
    assert list(far) == sorted(far) and list(pd) == sorted(pd)
    # +inf, 4 distinct scores, -inf
    assert len(pts) == 6


def test_roc_csv(tmp_path):
    pts = roc_curve(ScoreSet([1.0, 2.0], [0.0]))
    write_roc_csv(pts, tmp_path / "roc.csv")
    rows = list(csv.reader(open(tmp_path / "roc.csv")))
    assert rows[0] == ["far", "pd"] and len(rows) == len(pts) + 1


def test_summarize_keys():
    m = summarize(ScoreSet([1.0, 2.0], [-1.0, 0.0]))
    assert m == {"auc": 1.0, "acc_at_0.5": 1.0, "pd_at_5": 1.0, "pd_at_1": 1.0, "n_pos": 2, "n_neg": 2}
