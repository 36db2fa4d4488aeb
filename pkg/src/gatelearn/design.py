"""Information matrices and relative D-efficiency of candidate subjects."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, EmptyCandidateSet, NotPositiveDefinite, SingularBaseDesign
from .linalg import CholFactor, cholesky, logdet_rank_one, sym_matrix
from .logistic import LogisticModel, bernoulli_variance


def subject_weight(model, x):
    """Design weight ``F(x)(1 - F(x))`` of one subject (or of each row)."""
    return bernoulli_variance(model.linear_predictor(x))


def information_matrix(X_labeled, model):
    """``X^T W X / n`` for the rows of ``X_labeled`` (active columns only)."""
    X = np.asarray(X_labeled, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.k:
        raise DimensionMismatch(f"rows of shape {X.shape} for a {model.k}-variable model")
    n = X.shape[0]
    if n < 1:
        raise DimensionMismatch("information matrix needs at least one row")
    w = subject_weight(model, X)
    return sym_matrix(X.T @ (w[:, None] * X) / n, atol=1e-12)


@dataclass(frozen=True)
class DesignState:
    """Equal-weight design on the labeled subjects under the current fit.

    ``X`` keeps the labeled rows restricted to ``model.active_vars`` so the
    query loop does not re-gather them.  ``chol`` and ``log_det`` are None
    when the information matrix is numerically singular.
    """

    labeled: tuple
    y: np.ndarray
    model: LogisticModel
    X: np.ndarray
    info: np.ndarray
    chol: Optional[CholFactor]

    @property
    def n(self):
        return len(self.labeled)

    @property
    def active_vars(self):
        return self.model.active_vars

    @property
    def log_det(self):
        return None if self.chol is None else self.chol.log_det

    @property
    def singular(self):
        return self.chol is None

    def normalized_det(self):
        """``|M|^(1/k)``; zero for a singular design."""
        if self.chol is None:
            return 0.0
        return float(np.exp(self.chol.log_det / self.model.k))


def design_state(X_pool, labeled, y, model):
    """Build a :class:`DesignState` for ``labeled`` pool rows under ``model``."""
    labeled = tuple(int(i) for i in labeled)
    y = np.asarray(y, dtype=float)
    if len(labeled) < 1:
        raise DimensionMismatch("design needs at least one labeled subject")
    if y.shape != (len(labeled),):
        raise DimensionMismatch(f"{y.shape} labels for {len(labeled)} subjects")
    X = np.asarray(X_pool)[np.ix_(labeled, model.active_vars)].astype(float)
    info = information_matrix(X, model)
    try:
        chol = cholesky(info)
    except NotPositiveDefinite:
        chol = None
    return DesignState(labeled, y, model, X, info, chol)


def re_d_efficiency(state, x_cand):
    """Relative D-efficiency of adding one subject (``x_cand`` may be rows).

    The augmented design puts mass ``1/(n+1)`` on the candidate and
    ``n/(n+1)`` on the current design, so
    ``M' = c M + (w/(n+1)) x x^T`` with ``c = n/(n+1)``.
    """
    if state.chol is None:
        raise SingularBaseDesign("information matrix of the current design is singular")
    n, k = state.n, state.model.k
    w = subject_weight(state.model, x_cand)
    new = logdet_rank_one(state.chol, n / (n + 1.0), w / (n + 1.0), x_cand)
    out = np.expm1((np.asarray(new) - state.chol.log_det) / k)
    return float(out) if out.ndim == 0 else out


def score_candidates(state, candidates, X_pool):
    """Pick the candidate pool index with the largest relative D-efficiency.

    Ties go to the lowest pool index.  For a singular current design the
    score is the log-determinant of each augmented matrix (factored
    directly); if every augmented matrix is still singular the candidate
    with the largest ``w * x^T x`` wins.

    Returns ``(best_index, best_value)``.
    """
    cand = np.unique(np.asarray(candidates, dtype=int))
    if cand.size == 0:
        raise EmptyCandidateSet("no candidates to score")
    Xc = np.asarray(X_pool)[np.ix_(cand, state.model.active_vars)].astype(float)
    if state.chol is not None:
        values = re_d_efficiency(state, Xc)
    else:
        values = _singular_scores(state, Xc)
    best = int(np.argmax(values))  # first maximum = lowest pool index
    return int(cand[best]), float(values[best])


def _singular_scores(state, Xc):
    n = state.n
    w = subject_weight(state.model, Xc)
    base = n * state.info
    logdets = np.full(Xc.shape[0], -np.inf)
    for j, (x, wj) in enumerate(zip(Xc, w)):
        try:
            logdets[j] = cholesky((base + wj * np.outer(x, x)) / (n + 1.0)).log_det
        except NotPositiveDefinite:
            pass
    if np.isfinite(logdets).any():
        return logdets
    return w * np.einsum("ij,ij->i", Xc, Xc)
