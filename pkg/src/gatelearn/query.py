"""Two-stage subject query: uncertainty filtering, then D-efficiency argmax."""

from dataclasses import dataclass, field

import numpy as np

from .design import design_state, score_candidates
from .errors import EmptyPool, PoolExhausted
from .logistic import IrlsControls, fit_irls, predict_prob


@dataclass(frozen=True)
class UncertaintyScores:
    """``|F(x_j) - alpha|`` for each unlabeled pool index in ``pool_index``."""

    distances: np.ndarray
    pool_index: np.ndarray


@dataclass
class BatchTrace:
    queried: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    candidate_sizes: list = field(default_factory=list)
    scores: list = field(default_factory=list)
    refit_reports: list = field(default_factory=list)
    candidate_sets: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "queried": [int(i) for i in self.queried],
            "labels": [int(v) for v in self.labels],
            "candidate_sizes": [int(s) for s in self.candidate_sizes],
            "scores": [float(s) for s in self.scores],
            "refits": [r.to_dict() for r in self.refit_reports],
        }


def uncertainty_distances(model, X_pool, unlabeled):
    unlabeled = np.asarray(unlabeled, dtype=int)
    if unlabeled.size == 0:
        raise EmptyPool("no unlabeled subjects")
    X = np.asarray(X_pool)[np.ix_(unlabeled, model.active_vars)]
    d = np.abs(predict_prob(model, X) - model.alpha)
    return UncertaintyScores(np.atleast_1d(d), unlabeled)


def candidate_set(scores, h):
    """Pool indices whose distance is at most the ``h``-th smallest distinct distance.

    With fewer than ``h`` distinct values the whole pool qualifies.
    """
    if h < 1:
        raise ValueError("h must be a positive integer")
    d = scores.distances
    if d.size == 0:
        raise EmptyPool("no unlabeled subjects")
    distinct = np.unique(d)
    d0 = distinct[min(h, distinct.size) - 1]
    return scores.pool_index[d <= d0]


def query_batch(state, pool, oracle, n_q, h, controls=None):
    """Label ``n_q`` subjects one at a time, refitting after each.

    At every step the distances are recomputed under the latest fit, the
    candidate set is rebuilt, the relative D-efficiency argmax is queried and
    the model is re-estimated (warm start).  Refits that fail to converge
    are kept and recorded.  Returns ``(new_state, BatchTrace)``.
    """
    controls = controls or IrlsControls()
    labeled = list(state.labeled)
    y = list(state.y)
    is_labeled = np.zeros(pool.N, dtype=bool)
    is_labeled[labeled] = True
    unlabeled = pool.train_idx[~is_labeled[pool.train_idx]]
    if unlabeled.size < n_q:
        raise PoolExhausted(f"{unlabeled.size} unlabeled subjects left, batch needs {n_q}")

    trace = BatchTrace()
    active = state.active_vars
    for _ in range(n_q):
        scores = uncertainty_distances(state.model, pool.X, unlabeled)
        cands = candidate_set(scores, h)
        best, value = score_candidates(state, cands, pool.X)
        label = oracle.query(best)

        labeled.append(best)
        y.append(label)
        unlabeled = unlabeled[unlabeled != best]

        X_lab = pool.X[np.ix_(labeled, active)]
        model, report = fit_irls(X_lab, y, active, state.model.beta, controls, state.model.alpha)
        state = design_state(pool.X, labeled, y, model)

        trace.queried.append(best)
        trace.labels.append(label)
        trace.candidate_sizes.append(int(cands.size))
        trace.scores.append(value)
        trace.refit_reports.append(report)
        trace.candidate_sets.append(cands)
    return state, trace
