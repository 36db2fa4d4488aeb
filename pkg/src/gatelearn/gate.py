"""The GATE loop (batch subject query + grafting selection) and its baselines."""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .data import initial_split
from .design import design_state
from .errors import InsufficientPool, InvalidSpec, SingleClass
from .grafting import evaluate_stop, gradient_scores, select_variable
from .logistic import IrlsControls, LogisticModel, classify, fit_irls, predict_prob
from .metrics import accuracy, roc_auc, selection_quality
from .query import query_batch

log = logging.getLogger(__name__)


@dataclass
class GateConfig:
    n0: int = 100
    n_q: int = 30
    h: int = 200
    alpha: float = 0.5
    epsilon: float = 1e-2
    max_vars: Optional[int] = None  # None means P
    irls: IrlsControls = field(default_factory=IrlsControls)
    seed: int = 0
    initial_vars: Optional[tuple] = None  # None means the intercept column

    def violations(self):
        out = []
        for name in ("n0", "n_q", "h"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                out.append(f"{name} must be a positive integer, got {v!r}")
        if not 0.0 < self.alpha < 1.0:
            out.append(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not self.epsilon > 0:
            out.append(f"epsilon must be positive, got {self.epsilon!r}")
        if self.max_vars is not None and self.max_vars < 1:
            out.append(f"max_vars must be positive, got {self.max_vars!r}")
        if self.irls.tol <= 0 or self.irls.max_iter < 1:
            out.append("irls.tol must be positive and irls.max_iter at least 1")
        return out

    def validate(self):
        problems = self.violations()
        if problems:
            raise InvalidSpec("; ".join(problems))

    def to_dict(self):
        d = asdict(self)
        d["irls"]["ridge"] = list(self.irls.ridge)
        if self.initial_vars is not None:
            d["initial_vars"] = list(self.initial_vars)
        return d


@dataclass
class RunResult:
    """Outcome of one approach on one replication.

    ``iterations`` holds one dict per outer GATE iteration (empty for the
    baselines).  ``wall_time`` is kept out of :meth:`to_record` so records
    replay byte for byte.
    """

    approach: str
    model: LogisticModel
    n: int
    train: dict
    test: dict
    selection: Optional[dict] = None
    iterations: list = field(default_factory=list)
    labeled: tuple = ()
    termination: str = ""
    fit: Optional[dict] = None
    wall_time: float = 0.0
    test_roc: object = field(default=None, repr=False)

    @property
    def selected_vars(self):
        return self.model.active_vars

    def metric_values(self):
        sel = self.selection or {}
        return {
            "n": self.n,
            "train_acc": self.train.get("acc"),
            "train_auc": self.train.get("auc"),
            "test_acc": self.test.get("acc"),
            "test_auc": self.test.get("auc"),
            "tpr": sel.get("tpr"),
            "fpr": sel.get("fpr"),
            "n_vars": len(self.selected_vars),
            "time": self.wall_time,
        }

    def to_record(self):
        return {
            "approach": self.approach,
            "n": int(self.n),
            "selected_vars": [int(v) for v in self.model.active_vars],
            "beta": [float(b) for b in self.model.beta],
            "alpha": float(self.model.alpha),
            "train": _clean(self.train),
            "test": _clean(self.test),
            "selection": None if self.selection is None else _clean(self.selection),
            "labeled": [int(i) for i in self.labeled],
            "iterations": self.iterations,
            "termination": self.termination,
            "fit": self.fit,
        }


def _clean(d):
    return {k: (None if v is None or (isinstance(v, float) and np.isnan(v)) else float(v))
            for k, v in d.items()}


def evaluate(model, X, y):
    """Accuracy and AUC of ``model`` on rows ``X`` (full width) with labels ``y``."""
    Xa = X[:, list(model.active_vars)]
    p = np.atleast_1d(predict_prob(model, Xa))
    acc = accuracy(np.atleast_1d(classify(model, Xa)), y)
    try:
        roc = roc_auc(p, y)
    except SingleClass:
        return {"acc": acc, "auc": float("nan")}, None
    return {"acc": acc, "auc": roc.auc}, roc


def _finish(approach, pool, model, labeled, start, fit_report, **extra):
    train, _ = evaluate(model, pool.X[pool.train_idx], pool.y[pool.train_idx])
    test, roc = ({"acc": float("nan"), "auc": float("nan")}, None)
    if pool.test_idx.size:
        test, roc = evaluate(model, pool.X[pool.test_idx], pool.y[pool.test_idx])
    selection = None
    if pool.truth is not None:
        q = selection_quality(model.active_vars, pool.truth.active_set, pool.P)
        selection = {"tpr": q.tpr, "fpr": q.fpr}
    return RunResult(
        approach=approach,
        model=model,
        n=len(labeled),
        train=train,
        test=test,
        selection=selection,
        labeled=tuple(labeled),
        fit=fit_report.to_dict() if fit_report is not None else None,
        wall_time=time.perf_counter() - start,
        test_roc=roc,
        **extra,
    )


def _initial_vars(config, pool):
    if config.initial_vars is not None:
        return tuple(int(v) for v in config.initial_vars)
    if pool.intercept is None:
        raise InvalidSpec("pool has no intercept column; set initial_vars explicitly")
    return (pool.intercept,)


def run_gate(config, pool, oracle):
    """Run GATE on ``pool`` and evaluate the final model.

    The initial ``n0`` subjects are drawn with ``config.seed``.  Each outer
    iteration queries a batch, scores the inactive variables by gradient
    magnitude and tries the best one; the run ends when the stopping
    criterion rejects it, the variable cap is hit or the training pool runs
    dry.
    """
    config.validate()
    start = time.perf_counter()
    max_vars = pool.P if config.max_vars is None else min(config.max_vars, pool.P)
    if pool.train_idx.size < config.n0 + config.n_q:
        raise InsufficientPool(
            f"training split has {pool.train_idx.size} points, need at least n0 + n_q = "
            f"{config.n0 + config.n_q}"
        )
    rng = np.random.default_rng(config.seed)
    labeled = list(initial_split(pool, config.n0, rng).labeled)
    y = oracle.query_many(labeled)
    active = _initial_vars(config, pool)

    model, report = fit_irls(
        pool.X[np.ix_(labeled, active)], y, active, None, config.irls, config.alpha
    )
    state = design_state(pool.X, labeled, y, model)
    iterations = [{"init": report.to_dict()}]
    n_unlabeled = pool.train_idx.size - len(labeled)
    crit = 1.0
    termination = "max iterations"
    while crit >= config.epsilon and len(active) <= max_vars:
        if n_unlabeled == 0:
            termination = "pool exhausted"
            break
        nq = min(config.n_q, n_unlabeled)
        state, batch = query_batch(state, pool, oracle, nq, config.h, config.irls)
        n_unlabeled -= nq
        rec = {"batch": batch.to_dict()}
        iterations.append(rec)

        if len(active) >= max_vars:
            termination = "variable cap reached"
            break
        inactive = np.setdiff1d(np.arange(pool.P), active)
        probs = np.atleast_1d(predict_prob(state.model, state.X))
        scores = gradient_scores(pool.X, state.labeled, probs, state.y, inactive)
        u = select_variable(scores)
        decision, new_state = evaluate_stop(state, u, pool.X, config.epsilon, config.irls)
        rec["decision"] = decision.to_dict()
        rec["g"] = max(s.g for s in scores)
        crit = decision.crit if np.isfinite(decision.crit) else 0.0
        if decision.accept:
            state = new_state
            active = state.active_vars
        else:
            termination = decision.reason
        if nq < config.n_q:
            termination = "pool exhausted"
            break

    final, report = fit_irls(
        state.X, state.y, state.active_vars, state.model.beta, config.irls, config.alpha
    )
    return _finish(
        "A", pool, final, state.labeled, start, report,
        iterations=iterations, termination=termination,
    )


def run_baseline_full(pool, alpha=0.5, controls=None):
    """Baseline (B): every variable, every training point, plain MLE (no ridge)."""
    start = time.perf_counter()
    controls = controls or IrlsControls(ridge=())
    idx = pool.train_idx
    all_vars = tuple(range(pool.P))
    model, report = fit_irls(pool.X[idx], pool.y[idx], all_vars, None, controls, alpha)
    return _finish("B", pool, model, idx.tolist(), start, report)


def _random_subjects(pool, n, seed):
    if not 1 <= n <= pool.train_idx.size:
        raise InsufficientPool(f"cannot sample n={n} from {pool.train_idx.size} training points")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(pool.train_idx, size=n, replace=False))


def run_baseline_random_selected(pool, n, vars, seed=None, alpha=0.5, controls=None):
    """Baseline (C): ``n`` random training points, fitted on ``vars``."""
    start = time.perf_counter()
    vars = tuple(int(v) for v in vars)
    if not vars:
        raise InvalidSpec("baseline (C) needs at least one variable")
    idx = _random_subjects(pool, n, seed)
    model, report = fit_irls(pool.X[np.ix_(idx, vars)], pool.y[idx], vars, None, controls, alpha)
    return _finish("C", pool, model, idx.tolist(), start, report)


def run_baseline_random_full(pool, n, seed=None, alpha=0.5, controls=None):
    """Baseline (D): ``n`` random training points, fitted on all variables."""
    start = time.perf_counter()
    idx = _random_subjects(pool, n, seed)
    all_vars = tuple(range(pool.P))
    model, report = fit_irls(pool.X[idx], pool.y[idx], all_vars, None, controls, alpha)
    return _finish("D", pool, model, idx.tolist(), start, report)
