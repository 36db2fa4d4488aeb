import math

import numpy as np
import pytest

from gatelearn.data import LabelOracle, case_spec, gen_synthetic, initial_split
from gatelearn.design import design_state, subject_weight
from gatelearn.errors import EmptyPool, OracleFailure, PoolExhausted
from gatelearn.logistic import LogisticModel, fit_irls, predict_prob
from gatelearn.query import UncertaintyScores, candidate_set, query_batch, uncertainty_distances

from oracles import assembled_info


def _scores(d):
    d = np.asarray(d, dtype=float)
    return UncertaintyScores(d, np.arange(d.size))


def _setup(seed, N=160, n0=10, active=(0, 1, 2), case=3):
    pool = gen_synthetic(case_spec(case, P=8), N=N, test_size=40, seed=seed)
    pool = initial_split(pool, n0, seed=seed + 1)
    labeled = list(pool.labeled)
    y = pool.y[labeled]
    model, _ = fit_irls(pool.X[np.ix_(labeled, active)], y, active)
    return pool, design_state(pool.X, labeled, y, model)


def test_distance_at_threshold_is_zero():
    m = LogisticModel((0,), [0.0])
    s = uncertainty_distances(m, np.ones((3, 1)), [0, 2])
    np.testing.assert_array_equal(s.distances, [0.0, 0.0])
    np.testing.assert_array_equal(s.pool_index, [0, 2])


def test_distance_with_shifted_threshold():
    m = LogisticModel((0,), [math.log(3)], alpha=0.7)
    s = uncertainty_distances(m, np.ones((1, 1)), [0])
    assert s.distances[0] == pytest.approx(0.05, abs=1e-12)


def test_distances_use_only_active_columns():
    X = np.array([[1.0, 99.0, 2.0], [1.0, -99.0, -2.0]])
    m = LogisticModel((0, 2), [0.1, 0.5])
    s = uncertainty_distances(m, X, [0, 1])
    want = np.abs(predict_prob(m, X[:, [0, 2]]) - 0.5)
    np.testing.assert_allclose(s.distances, want)


def test_empty_pool():
    with pytest.raises(EmptyPool):
        uncertainty_distances(LogisticModel((0,), [0.0]), np.ones((2, 1)), [])


def test_candidate_set_h_smallest():
    got = candidate_set(_scores([0.3, 0.1, 0.2, 0.4]), 2)
    assert sorted(got.tolist()) == [1, 2]


def test_candidate_set_keeps_ties():
    got = candidate_set(_scores([0.1, 0.1, 0.2, 0.3]), 1)
    assert sorted(got.tolist()) == [0, 1]
    got = candidate_set(_scores([0.1, 0.1, 0.2, 0.3]), 2)
    assert sorted(got.tolist()) == [0, 1, 2]


def test_candidate_set_h_exceeds_pool():
    rng = np.random.default_rng(0)
    d = rng.random(12)
    assert sorted(candidate_set(_scores(d), 50).tolist()) == list(range(12))


def test_candidate_set_rejects_bad_h():
    with pytest.raises(ValueError):
        candidate_set(_scores([0.1]), 0)


def test_candidate_set_random_against_sort():
    rng = np.random.default_rng(1)
    for _ in range(200):
        H = int(rng.integers(1, 60))
        d = np.round(rng.random(H), 2)  # rounding forces ties
        h = int(rng.integers(1, 70))
        got = set(candidate_set(_scores(d), h).tolist())
        distinct = sorted(set(d.tolist()))
        d0 = distinct[min(h, len(distinct)) - 1]
        assert got == {j for j in range(H) if d[j] <= d0}
        assert len(got) >= min(h, H) or len(distinct) < h


def test_h_one_with_single_query_picks_most_uncertain():
    pool, state = _setup(3)
    oracle = LabelOracle(pool)
    unl = pool.unlabeled()
    d = np.abs(predict_prob(state.model, pool.X[np.ix_(unl, state.active_vars)]) - 0.5)
    _, trace = query_batch(state, pool, oracle, n_q=1, h=1)
    assert trace.candidate_sizes == [1]
    assert trace.queried[0] == unl[int(np.argmin(d))]


def test_batch_bookkeeping():
    pool, state = _setup(4)
    oracle = LabelOracle(pool)
    new, trace = query_batch(state, pool, oracle, n_q=7, h=20)
    assert new.n == state.n + 7
    assert len(set(new.labeled)) == new.n
    assert list(new.labeled[: state.n]) == list(state.labeled)
    assert list(new.labeled[state.n:]) == trace.queried
    assert oracle.query_count == 7 and oracle.revealed == trace.queried
    assert not set(trace.queried) & set(pool.test_idx.tolist())
    np.testing.assert_array_equal(new.y, pool.y[list(new.labeled)])
    assert new.active_vars == state.active_vars
    for q, cands in zip(trace.queried, trace.candidate_sets):
        assert q in set(cands.tolist())
        assert not set(cands.tolist()) & set(new.labeled[: state.n])


def _reference_batch(pool, labeled, y, model, n_q, h):
    """Plain-loop version of one batch, scoring by the assembled determinant."""
    labeled, y = list(labeled), list(y)
    active = model.active_vars
    queried = []
    for _ in range(n_q):
        taken = set(labeled)
        unl = [j for j in pool.train_idx.tolist() if j not in taken]
        d = {j: abs(1 / (1 + math.exp(-float(pool.X[j, list(active)] @ model.beta))) - 0.5)
             for j in unl}
        distinct = sorted(set(d.values()))
        d0 = distinct[min(h, len(distinct)) - 1]
        cands = sorted(j for j in unl if d[j] <= d0)
        best, best_val = None, -np.inf
        for j in cands:
            rows = pool.X[np.ix_(labeled + [j], active)]
            val = np.linalg.slogdet(assembled_info(rows, subject_weight(model, rows)))[1]
            if val > best_val + 1e-12:
                best, best_val = j, val
        labeled.append(best)
        y.append(int(pool.y[best]))
        queried.append(best)
        model, _ = fit_irls(pool.X[np.ix_(labeled, active)], y, active, model.beta)
    return queried


@pytest.mark.parametrize("seed", [10, 11, 12])
def test_batch_matches_reference_loop(seed):
    pool, state = _setup(seed, N=140)
    _, trace = query_batch(state, pool, LabelOracle(pool), n_q=5, h=15)
    ref = _reference_batch(pool, state.labeled, state.y, state.model, 5, 15)
    assert trace.queried == ref


def test_distances_recomputed_after_every_refit():
    pool, state = _setup(20)
    _, trace = query_batch(state, pool, LabelOracle(pool), n_q=4, h=10)
    # the candidate set at step t is what the t-th refit implies, not the starting model
    labeled = list(state.labeled)
    y = list(state.y)
    model = state.model
    for t, q in enumerate(trace.queried):
        unl = np.setdiff1d(pool.train_idx, labeled)
        want = candidate_set(uncertainty_distances(model, pool.X, unl), 10)
        np.testing.assert_array_equal(np.sort(trace.candidate_sets[t]), np.sort(want))
        labeled.append(q)
        y.append(int(pool.y[q]))
        model, _ = fit_irls(pool.X[np.ix_(labeled, model.active_vars)], y, model.active_vars,
                            model.beta)


def test_batch_is_deterministic():
    pool, state = _setup(30)
    _, a = query_batch(state, pool, LabelOracle(pool), n_q=6, h=12)
    _, b = query_batch(state, pool, LabelOracle(pool), n_q=6, h=12)
    assert a.to_dict() == b.to_dict()


def test_whole_pool_when_h_large():
    pool, state = _setup(31, N=80)
    _, trace = query_batch(state, pool, LabelOracle(pool), n_q=1, h=10_000)
    assert trace.candidate_sizes[0] == pool.train_idx.size - state.n


def test_pool_exhausted():
    pool, state = _setup(32, N=60, n0=10)
    free = pool.train_idx.size - state.n
    with pytest.raises(PoolExhausted):
        query_batch(state, pool, LabelOracle(pool), n_q=free + 1, h=5)
    new, _ = query_batch(state, pool, LabelOracle(pool), n_q=free, h=5)
    assert new.n == pool.train_idx.size


def test_oracle_refusal_propagates():
    pool, state = _setup(33)
    with pytest.raises(OracleFailure):
        query_batch(state, pool, LabelOracle(pool, allowed=[]), n_q=1, h=5)
