import math

import numpy as np
import pytest

from gatelearn.errors import DimensionMismatch, EmptyResults, EmptyTruthSet, SingleClass
from gatelearn.metrics import (
    accuracy,
    aggregate,
    auc_concordance,
    roc_auc,
    roc_curve,
    selection_quality,
    summarize,
)

from oracles import pairwise_auc


def test_accuracy_examples():
    assert accuracy([1, 0, 1, 1], [1, 0, 0, 1]) == 0.75
    assert accuracy([0], [0]) == 1.0
    with pytest.raises(DimensionMismatch):
        accuracy([1, 0], [1])
    with pytest.raises(DimensionMismatch):
        accuracy([], [])


def test_auc_perfect_and_reversed():
    assert auc_concordance([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc_concordance([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0


def test_auc_all_tied_is_half():
    assert auc_concordance([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auc_single_class():
    with pytest.raises(SingleClass):
        auc_concordance([0.1, 0.2], [1, 1])
    with pytest.raises(SingleClass):
        roc_curve([0.1, 0.2], [0, 0])


def test_auc_matches_pairwise_count_exactly():
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(500):
        n = int(rng.integers(2, 51))
        s = np.round(rng.random(n), int(rng.integers(1, 4)))  # coarse grids force ties
        t = rng.integers(0, 2, n)
        if t.min() == t.max():
            continue
        exact = pairwise_auc(s.tolist(), t.tolist())
        n_pos = int(t.sum())
        # the concordance is a multiple of 1/(2 n+ n-): compare on that lattice
        lattice = 2 * n_pos * (n - n_pos)
        assert round(auc_concordance(s, t) * lattice) == exact * lattice
        assert auc_concordance(s, t) == pytest.approx(float(exact), abs=1e-12)
        checked += 1
    assert checked > 400


def test_roc_endpoints_and_monotone():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(5, 80))
        s = np.round(rng.random(n), 1)
        t = rng.integers(0, 2, n)
        if t.min() == t.max():
            continue
        fpr, tpr = roc_curve(s, t)
        assert (fpr[0], tpr[0]) == (0.0, 0.0)
        assert (fpr[-1], tpr[-1]) == (1.0, 1.0)
        assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)
        assert fpr.size == np.unique(s).size + 1


def test_roc_trapezoid_equals_concordance():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(5, 80))
        s = np.round(rng.standard_normal(n), 1)
        t = rng.integers(0, 2, n)
        if t.min() == t.max():
            continue
        roc = roc_auc(s, t)
        assert roc.trapezoid() == pytest.approx(roc.auc, abs=1e-12)
        assert len(roc.points) == roc.fpr.size


def test_roc_small_example():
    fpr, tpr = roc_curve([0.9, 0.7, 0.7, 0.2], [1, 1, 0, 0])
    np.testing.assert_allclose(fpr, [0, 0, 0.5, 1])
    np.testing.assert_allclose(tpr, [0, 0.5, 1, 1])


def test_selection_quality():
    q = selection_quality([0, 1, 2, 7], [0, 1, 2, 3], 10)
    assert q.tpr == 0.75
    assert q.fpr == pytest.approx(1 / 6)
    perfect = selection_quality([0, 1], [0, 1], 5)
    assert (perfect.tpr, perfect.fpr) == (1.0, 0.0)
    without = selection_quality([0, 1, 2, 7], [0, 1, 2, 3], 10, exclude=(0,))
    assert without.tpr == pytest.approx(2 / 3)
    assert without.fpr == pytest.approx(1 / 6)
    with pytest.raises(EmptyTruthSet):
        selection_quality([0], [], 5)
    with pytest.raises(EmptyTruthSet):
        selection_quality([0], range(3), 3)


def test_summarize_uses_sample_sd():
    row = summarize([1.0, 2.0, 3.0, 4.0], "x")
    assert row.mean == 2.5
    assert row.sd == pytest.approx(math.sqrt(5 / 3))
    assert row.count == 4 and not row.sd_flagged


def test_summarize_single_and_missing():
    row = summarize([3.0], "x")
    assert (row.mean, row.sd, row.count) == (3.0, 0.0, 1) and row.sd_flagged
    row = summarize([None, float("nan"), 2.0, 4.0])
    assert row.mean == 3.0 and row.count == 2
    assert math.isnan(summarize([]).mean)


def test_aggregate():
    results = [{"acc": 0.8, "n": 100}, {"acc": 0.9, "n": 120}]
    rows = aggregate(results, ["acc", "n"])
    assert rows[0].metric == "acc" and rows[0].mean == pytest.approx(0.85)
    assert rows[1].mean == 110
    with pytest.raises(EmptyResults):
        aggregate([], ["acc"])
