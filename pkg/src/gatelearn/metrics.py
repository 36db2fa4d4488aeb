"""Classification and variable-selection metrics, and replication summaries."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DimensionMismatch, EmptyResults, EmptyTruthSet, SingleClass


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def trapezoid(self):
        return float(np.sum(np.diff(self.fpr) * (self.tpr[1:] + self.tpr[:-1]) / 2.0))


@dataclass(frozen=True)
class SelectionQuality:
    tpr: float
    fpr: float


def accuracy(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.size == 0:
        raise DimensionMismatch(f"shapes {pred.shape} and {truth.shape}")
    return float(np.mean(pred == truth))


def auc_concordance(scores, truth):
    """Mann-Whitney AUC: P(s+ > s-) + P(s+ = s-)/2 from average ranks."""
    s = np.asarray(scores, dtype=float)
    t = np.asarray(truth).astype(bool)
    if s.shape != t.shape:
        raise DimensionMismatch(f"shapes {s.shape} and {t.shape}")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes")
    ranks = rankdata(s)  # ties get the average rank
    u = ranks[t].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, truth):
    """ROC points from a sweep over the distinct scores, highest first."""
    s = np.asarray(scores, dtype=float)
    t = np.asarray(truth).astype(bool)
    if s.shape != t.shape:
        raise DimensionMismatch(f"shapes {s.shape} and {t.shape}")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s_sorted, t_sorted = s[order], t[order]
    # last position of each run of equal scores
    ends = np.flatnonzero(np.diff(s_sorted) != 0)
    ends = np.append(ends, s_sorted.size - 1)
    tp = np.cumsum(t_sorted)[ends]
    fp = (ends + 1) - tp
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    return fpr, tpr


def roc_auc(scores, truth):
    """ROC curve plus the concordance AUC."""
    fpr, tpr = roc_curve(scores, truth)
    return RocCurve(fpr, tpr, auc_concordance(scores, truth))


def selection_quality(selected, truth_active, P, exclude=()):
    """TPR and FPR of a selected variable set against the true active set.

    Indices in ``exclude`` (for instance the intercept, which is always in
    the model) are dropped from both sides before counting.
    """
    skip = set(int(j) for j in exclude)
    J = set(int(j) for j in selected) - skip
    truth = set(int(j) for j in truth_active) - skip
    if not truth:
        raise EmptyTruthSet("true active set is empty")
    inactive = set(range(P)) - truth - skip
    if not inactive:
        raise EmptyTruthSet("every variable is truly active; FPR undefined")
    return SelectionQuality(len(J & truth) / len(truth), len(J & inactive) / len(inactive))


@dataclass
class SummaryRow:
    metric: str
    mean: float
    sd: float
    count: int

    @property
    def sd_flagged(self):
        # a single replication has no spread; sd is reported as 0
        return self.count < 2


def summarize(values, metric=""):
    v = np.asarray([x for x in values if x is not None and not _isnan(x)], dtype=float)
    if v.size == 0:
        return SummaryRow(metric, float("nan"), float("nan"), 0)
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return SummaryRow(metric, float(np.mean(v)), sd, int(v.size))


def _isnan(x):
    return isinstance(x, float) and math.isnan(x)


def aggregate(results, metrics):
    """Mean and sample sd (n - 1) of each metric over a list of results.

    ``results`` are mappings (or objects with a ``metric_values`` mapping);
    missing or NaN values are skipped per metric.
    """
    if not results:
        raise EmptyResults("nothing to aggregate")
    rows = []
    for m in metrics:
        vals = []
        for r in results:
            d = r if isinstance(r, dict) else r.metric_values()
            vals.append(d.get(m))
        rows.append(summarize(vals, m))
    return rows
