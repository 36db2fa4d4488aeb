import math

import numpy as np
import pytest

from gatelearn.design import design_state
from gatelearn.errors import EmptyInactiveSet, SingularAugmentedDesign
from gatelearn.grafting import (
    VariableScore,
    evaluate_stop,
    gradient_scores,
    select_variable,
    stop_decision,
)
from gatelearn.logistic import LogisticModel, fit_irls, log_likelihood, predict_prob


def _fitted_state(rng, n=60, P=6, active=(0, 1)):
    X = np.column_stack([np.ones(n), rng.standard_normal((n, P - 1))])
    y = (rng.random(n) < 1 / (1 + np.exp(-(X[:, 1] - 0.8 * X[:, 2])))).astype(int)
    labeled = list(range(n))
    model, _ = fit_irls(X[:, list(active)], y, active)
    return X, design_state(X, labeled, y, model)


def test_zero_residuals_give_zero_scores():
    X = np.arange(12.0).reshape(4, 3)
    y = np.array([1, 0, 1, 0])
    scores = gradient_scores(X, range(4), y.astype(float), y, [1, 2])
    assert [s.g for s in scores] == [0.0, 0.0]


def test_constant_column_score_is_residual_sum():
    X = np.column_stack([np.ones(4), np.full(4, 2.0)])
    y = np.array([1, 1, 0, 1])
    p = np.full(4, 0.5)
    (s,) = gradient_scores(X, range(4), p, y, [1])
    assert s.g == pytest.approx(2.0 * abs(np.sum(y - p)))


def test_empty_inactive_set():
    with pytest.raises(EmptyInactiveSet):
        gradient_scores(np.ones((2, 1)), [0, 1], [0.5, 0.5], [0, 1], [])
    with pytest.raises(EmptyInactiveSet):
        select_variable([])


def test_score_is_directional_derivative_of_loglik():
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(20):
        X, state = _fitted_state(rng)
        inactive = [2, 3, 4, 5]
        p = predict_prob(state.model, state.X)
        scores = gradient_scores(X, state.labeled, p, state.y, inactive)
        for s in scores:
            cols = [*state.active_vars, s.var_index]
            Xc = X[np.ix_(state.labeled, cols)]

            def ll(t):
                b = np.append(state.model.beta, t)
                return log_likelihood(LogisticModel(tuple(cols), b), Xc, state.y)

            fd = (ll(h) - ll(-h)) / (2 * h)
            assert s.g == pytest.approx(abs(fd), rel=1e-5, abs=1e-6)


def test_tie_break_lowest_index():
    scores = [VariableScore(2, 0.3), VariableScore(7, 0.9), VariableScore(5, 0.9)]
    assert select_variable(scores) == 5


def test_select_matches_argmax():
    rng = np.random.default_rng(1)
    for _ in range(100):
        idx = rng.permutation(40)[:12]
        g = np.round(rng.random(12), 1)
        scores = [VariableScore(int(u), float(v)) for u, v in zip(idx, g)]
        top = g.max()
        assert select_variable(scores) == min(int(u) for u, v in zip(idx, g) if v == top)


def test_stop_decision_examples():
    reject = stop_decision(2.0, 1.0, 0.6)
    assert reject.crit == pytest.approx(0.5) and not reject.accept
    small = stop_decision(2.0, 2.02, 0.01)
    assert small.crit == pytest.approx(0.01)
    assert stop_decision(2.0, 2.0, 1e-12).crit == 0.0
    assert not stop_decision(2.0, 2.0, 1e-12).accept


def test_stop_decision_at_boundary_accepts():
    assert stop_decision(4.0, 5.0, 0.25).accept


def test_stop_decision_requires_positive_m0():
    with pytest.raises(SingularAugmentedDesign):
        stop_decision(0.0, 1.0, 0.1)


def test_evaluate_stop_matches_definition():
    rng = np.random.default_rng(2)
    for _ in range(20):
        X, state = _fitted_state(rng)
        dec, new = evaluate_stop(state, 2, X, 0.01)
        k = state.model.k
        m0 = np.linalg.det(state.info) ** (1 / k)
        m1 = np.linalg.det(new.info) ** (1 / (k + 1))
        assert dec.m0 == pytest.approx(m0, rel=1e-8)
        assert dec.m1 == pytest.approx(m1, rel=1e-8)
        assert dec.crit == pytest.approx(abs(m1 - m0) / m0, rel=1e-8, abs=1e-12)
        assert dec.accept == (dec.crit >= 0.01)
        assert new.active_vars == (*state.active_vars, 2)
        assert new.labeled == state.labeled


def test_refit_starts_from_padded_coefficients():
    rng = np.random.default_rng(3)
    X, state = _fitted_state(rng, n=200)
    _, new = evaluate_stop(state, 3, X, 0.01)
    ref, _ = fit_irls(X[:, [0, 1, 3]], state.y, (0, 1, 3))
    np.testing.assert_allclose(new.model.beta, ref.beta, atol=1e-7)


def test_duplicate_column_is_rejected():
    rng = np.random.default_rng(4)
    X, state = _fitted_state(rng)
    X = np.column_stack([X, X[:, 1]])
    dec, _ = evaluate_stop(state, X.shape[1] - 1, X, 0.01)
    assert not dec.accept
    assert dec.reason in ("singular augmented design", "below epsilon")


def test_active_variable_rejected():
    rng = np.random.default_rng(5)
    X, state = _fitted_state(rng)
    with pytest.raises(ValueError):
        evaluate_stop(state, 1, X, 0.01)


def test_singular_base_design_rejects():
    # intercept-only model whose weight underflows: M_k = 0
    X = np.column_stack([np.ones(3), [0.0, 1.0, 2.0]])
    state = design_state(X, [0, 1], [1, 0], LogisticModel((0,), [800.0]))
    assert state.singular
    dec, _ = evaluate_stop(state, 1, X, 0.01)
    assert not dec.accept and dec.reason == "singular base design"


def test_rescaling_new_column_scales_m1():
    rng = np.random.default_rng(6)
    X, state = _fitted_state(rng)
    d1, _ = evaluate_stop(state, 3, X, 0.01)
    X2 = X.copy()
    X2[:, 3] *= 2.0
    d2, _ = evaluate_stop(state, 3, X2, 0.01)
    # doubling a column multiplies |M_{k+1}| by 4, so m1 grows by 4^(1/(k+1))
    k1 = state.model.k + 1
    assert d2.m1 == pytest.approx(d1.m1 * 4 ** (1 / k1), rel=1e-6)
    assert d2.m0 == pytest.approx(d1.m0, rel=1e-12)


def test_crit_invariant_to_row_order():
    rng = np.random.default_rng(7)
    X, state = _fitted_state(rng)
    perm = rng.permutation(state.n)
    lab = np.asarray(state.labeled)[perm]
    state2 = design_state(X, lab, state.y[perm], state.model)
    d1, _ = evaluate_stop(state, 4, X, 0.01)
    d2, _ = evaluate_stop(state2, 4, X, 0.01)
    assert d1.crit == pytest.approx(d2.crit, rel=1e-6, abs=1e-10)
    assert math.isfinite(d1.crit)
