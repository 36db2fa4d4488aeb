"""Greedy forward variable selection by log-likelihood gradient magnitude."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .design import design_state
from .errors import EmptyInactiveSet, SingularAugmentedDesign
from .logistic import IrlsControls, fit_irls


@dataclass(frozen=True)
class VariableScore:
    var_index: int
    g: float


@dataclass(frozen=True)
class StopDecision:
    """Relative change in the normalized determinant when a variable is added.

    ``m0 = |M_k|^(1/k)`` before, ``m1 = |M_{k+1}|^(1/(k+1))`` after, both on
    the same labeled subjects.  ``accept`` is ``crit >= epsilon``.
    """

    crit: float
    m0: float
    m1: float
    accept: bool
    var_index: Optional[int] = None
    reason: str = ""

    def to_dict(self):
        return {
            "var": self.var_index,
            "crit": self.crit,
            "m0": self.m0,
            "m1": self.m1,
            "accept": self.accept,
            "reason": self.reason,
        }


def gradient_scores(X_pool, labeled, fitted_probs, y, inactive):
    """``|sum_i x_iu (y_i - p_i)|`` over the labeled rows for each inactive column ``u``."""
    inactive = np.asarray(inactive, dtype=int)
    if inactive.size == 0:
        raise EmptyInactiveSet("every variable is already active")
    resid = np.asarray(y, dtype=float) - np.asarray(fitted_probs, dtype=float)
    X = np.asarray(X_pool)[np.ix_(np.asarray(labeled, dtype=int), inactive)]
    g = np.abs(resid @ X)
    return [VariableScore(int(u), float(gu)) for u, gu in zip(inactive, g)]


def select_variable(scores):
    """Index of the largest gradient magnitude; ties go to the lowest index."""
    if not scores:
        raise EmptyInactiveSet("no variables to choose from")
    best = min(scores, key=lambda s: (-s.g, s.var_index))
    return best.var_index


def _log_normalized_det(state):
    if state.chol is None:
        return None
    return state.chol.log_det / state.model.k


def evaluate_stop(state, candidate_var, X_pool, epsilon, controls=None):
    """Refit with ``candidate_var`` added and decide whether to keep it.

    Returns ``(StopDecision, refit_state)``; ``refit_state`` is the design
    state of the ``k + 1`` variable model (None when the refit failed).
    A singular augmented design counts as no measurable gain and is
    rejected, as is a singular starting design.
    """
    controls = controls or IrlsControls()
    candidate_var = int(candidate_var)
    if candidate_var in state.active_vars:
        raise ValueError(f"variable {candidate_var} is already active")
    new_vars = (*state.active_vars, candidate_var)
    init = state.model.padded(new_vars).beta
    X_lab = np.asarray(X_pool)[np.ix_(state.labeled, new_vars)]
    model, _ = fit_irls(X_lab, state.y, new_vars, init, controls, state.model.alpha)
    new_state = design_state(X_pool, state.labeled, state.y, model)

    l0 = _log_normalized_det(state)
    l1 = _log_normalized_det(new_state)
    if l0 is None:
        return StopDecision(float("nan"), 0.0, _exp_or_zero(l1), False, candidate_var,
                            "singular base design"), new_state
    if l1 is None:
        return StopDecision(float("nan"), float(np.exp(l0)), 0.0, False, candidate_var,
                            "singular augmented design"), new_state
    # |m1 - m0| / m0 = |exp(l1 - l0) - 1|
    crit = abs(float(np.expm1(l1 - l0)))
    accept = crit >= epsilon
    return StopDecision(crit, float(np.exp(l0)), float(np.exp(l1)), accept, candidate_var,
                        "accepted" if accept else "below epsilon"), new_state


def _exp_or_zero(l):
    return 0.0 if l is None else float(np.exp(l))


def stop_decision(m0, m1, epsilon):
    """Crit from already computed normalized determinants."""
    if m0 <= 0:
        raise SingularAugmentedDesign("m0 must be positive")
    crit = abs(m1 - m0) / m0
    return StopDecision(crit, float(m0), float(m1), crit >= epsilon)
