"""Binary logistic regression: prediction, likelihood and IRLS fitting."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonBinaryLabel, NotPositiveDefinite, SingularSystem
from .linalg import cholesky, solve

# Probabilities are reported on the open interval even where float64 would round to 0 or 1.
_P_LO = np.finfo(float).tiny
_P_HI = np.nextafter(1.0, 0.0)
_LOG_CLAMP_LO = np.log(1e-12)
_LOG_CLAMP_HI = np.log1p(-1e-12)

RIDGE_LADDER = (1e-8, 1e-6, 1e-4, 1e-2)


@dataclass(frozen=True)
class LogisticModel:
    """Coefficients over an ordered set of active columns plus a threshold.

    ``beta[i]`` multiplies global column ``active_vars[i]``.
    """

    active_vars: tuple
    beta: np.ndarray
    alpha: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "active_vars", tuple(int(v) for v in self.active_vars))
        beta = np.array(self.beta, dtype=float).reshape(-1)
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if beta.size != len(self.active_vars):
            raise DimensionMismatch(
                f"beta has {beta.size} entries for {len(self.active_vars)} active variables"
            )
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta contains non-finite entries")

    @property
    def k(self):
        return len(self.active_vars)

    @classmethod
    def null(cls, active_vars, alpha=0.5):
        return cls(tuple(active_vars), np.zeros(len(active_vars)), alpha)

    def linear_predictor(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.k:
            raise DimensionMismatch(f"rows have {x.shape[-1]} columns, model has {self.k}")
        return x @ self.beta

    def padded(self, active_vars):
        """Same model re-expressed over ``active_vars`` (new coefficients are zero)."""
        lookup = dict(zip(self.active_vars, self.beta))
        beta = np.array([lookup.get(int(v), 0.0) for v in active_vars])
        return LogisticModel(tuple(active_vars), beta, self.alpha)


@dataclass
class IrlsControls:
    tol: float = 1e-8
    max_iter: int = 50
    ridge: tuple = RIDGE_LADDER
    step_tol: float = 1e-6
    max_halvings: int = 30


@dataclass
class FitReport:
    converged: bool
    iterations: int
    final_loglik: float
    ridge_used: float = 0.0
    max_abs_step: float = 0.0
    grad_norm: float = field(default=float("nan"))

    def to_dict(self):
        return {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "final_loglik": float(self.final_loglik),
            "ridge_used": float(self.ridge_used),
            "max_abs_step": float(self.max_abs_step),
        }


def sigmoid(eta):
    """Logistic function, evaluated without overflow and kept inside (0, 1)."""
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    np.clip(out, _P_LO, _P_HI, out=out)
    return out if out.ndim else float(out)


def bernoulli_variance(eta):
    """``F(eta) * (1 - F(eta))`` computed from the linear predictor.

    Working from ``eta`` rather than from a rounded probability keeps the
    tails accurate (about ``exp(-|eta|)``) instead of collapsing to zero.
    """
    e = np.exp(-np.abs(np.asarray(eta, dtype=float)))
    return e / (1.0 + e) ** 2


def predict_prob(model, x):
    return sigmoid(model.linear_predictor(x))


def classify(model, x):
    """Label 1 iff the fitted probability is strictly above ``model.alpha``."""
    p = predict_prob(model, x)
    return (np.asarray(p) > model.alpha).astype(int) if np.ndim(p) else int(p > model.alpha)


def _check_labels(y):
    y = np.asarray(y)
    if y.size and not np.all((y == 0) | (y == 1)):
        raise NonBinaryLabel("labels must be 0 or 1")
    return y.astype(float)


def _loglik_eta(eta, y):
    # log F = -log(1 + e^-eta), log(1 - F) = -log(1 + e^eta)
    log_p = np.clip(-np.logaddexp(0.0, -eta), _LOG_CLAMP_LO, _LOG_CLAMP_HI)
    log_q = np.clip(-np.logaddexp(0.0, eta), _LOG_CLAMP_LO, _LOG_CLAMP_HI)
    return float(np.sum(y * log_p + (1.0 - y) * log_q))


def log_likelihood(model, X, y):
    X = np.asarray(X, dtype=float).reshape(-1, model.k)
    y = _check_labels(y)
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if y.size == 0:
        return 0.0
    return _loglik_eta(X @ model.beta, y)


def score(model, X, y):
    """Gradient of the log-likelihood, ``X^T (y - p)``."""
    X = np.asarray(X, dtype=float)
    y = _check_labels(y)
    return X.T @ (y - predict_prob(model, X))


def fit_irls(X, y, active_vars, init_beta=None, controls=None, alpha=0.5):
    """Maximum-likelihood logistic fit by Newton/IRLS with step halving.

    ``X`` holds only the columns of ``active_vars`` (in that order).  When
    ``X^T W X`` cannot be factored, ridge values from ``controls.ridge`` are
    tried in increasing order and the penalty ``ridge/2 * |beta|^2`` is kept
    for the rest of the fit.  An empty ladder turns that case into
    :class:`SingularSystem`.

    Returns ``(LogisticModel, FitReport)``.  A fit that hits ``max_iter``
    or stalls in the line search comes back with ``converged=False`` and
    the best iterate found.
    """
    controls = controls or IrlsControls()
    X = np.asarray(X, dtype=float)
    y = _check_labels(y)
    active_vars = tuple(active_vars)
    if X.ndim != 2 or X.shape[1] != len(active_vars):
        raise DimensionMismatch(f"X has shape {X.shape} for {len(active_vars)} active variables")
    n, k = X.shape
    if n != y.size:
        raise DimensionMismatch(f"{n} rows but {y.size} labels")
    if n < 1 or k < 1:
        raise DimensionMismatch("need at least one row and one active variable")

    beta = np.zeros(k) if init_beta is None else np.array(init_beta, dtype=float)
    if beta.shape != (k,):
        raise DimensionMismatch(f"init_beta has shape {beta.shape}, expected ({k},)")

    ladder = [0.0, *sorted(controls.ridge)]
    level = 0
    lam = 0.0

    def objective(b):
        return _loglik_eta(X @ b, y) - 0.5 * lam * float(b @ b)

    obj = objective(beta)
    iterations = 0
    max_step = 0.0
    converged = False
    while True:
        eta = X @ beta
        H = X.T @ (bernoulli_variance(eta)[:, None] * X)
        while True:
            try:
                F = cholesky(H + lam * np.eye(k))
                break
            except NotPositiveDefinite:
                level += 1
                if level >= len(ladder):
                    raise SingularSystem(
                        f"weighted normal equations singular with ridge up to {lam:g}"
                    ) from None
                lam = ladder[level]
                obj = objective(beta)
        grad = X.T @ (y - sigmoid(eta)) - lam * beta
        step = solve(F, grad)
        # A vanishing gradient alone is not enough: under separation the
        # gradient decays while the Newton step stays large.
        if (np.max(np.abs(grad)) <= controls.tol
                and np.max(np.abs(step)) <= controls.step_tol * (1.0 + np.max(np.abs(beta)))):
            converged = True
            break
        if iterations >= controls.max_iter:
            break

        iterations += 1
        t = 1.0
        slack = 1e-12 * (1.0 + abs(obj))
        for _ in range(controls.max_halvings + 1):
            cand = beta + t * step
            cand_obj = objective(cand)
            if cand_obj >= obj - slack:
                break
            t *= 0.5
        else:
            break
        max_step = float(np.max(np.abs(t * step)))
        beta, obj = cand, cand_obj

    grad_norm = float(np.max(np.abs(X.T @ (y - sigmoid(X @ beta)) - lam * beta)))
    model = LogisticModel(active_vars, beta, alpha)
    report = FitReport(
        converged=converged,
        iterations=iterations,
        final_loglik=_loglik_eta(X @ beta, y),
        ridge_used=lam,
        max_abs_step=max_step,
        grad_norm=grad_norm,
    )
    return model, report
