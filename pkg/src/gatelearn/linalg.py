"""Dense symmetric positive-definite linear algebra.

Everything works in log-determinant space.  Factorizations are done by
LAPACK (through numpy); the positive-definiteness test is our own so that
near-singular information matrices are rejected consistently.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite

PIVOT_TOL = 1e-12


def sym_matrix(entries, atol=0.0):
    """Return ``entries`` as a symmetric float array.

    Asymmetry larger than ``atol`` (relative to the largest entry) is an
    error; anything smaller is averaged away.
    """
    a = np.array(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
    scale = max(np.max(np.abs(a)), 1.0)
    if np.max(np.abs(a - a.T)) > atol * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class CholFactor:
    """Lower Cholesky factor with its cached log-determinant."""

    lower: np.ndarray
    log_det: float

    @property
    def dim(self):
        return self.lower.shape[0]

    def reconstruct(self):
        return self.lower @ self.lower.T


def cholesky(S, pivot_tol=PIVOT_TOL):
    """Factor a symmetric matrix as ``L @ L.T``.

    Raises :class:`NotPositiveDefinite` when any pivot ``L[i, i]**2`` is at
    or below ``pivot_tol`` times the largest diagonal entry of ``S``.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {S.shape}")
    diag = np.diag(S)
    if not np.all(np.isfinite(S)):
        raise NotPositiveDefinite(0)
    scale = diag.max()
    if scale <= 0.0:
        raise NotPositiveDefinite(int(np.argmin(diag)), float(diag.min()))
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(_first_bad_pivot(S), None) from None
    pivots = np.diag(L) ** 2
    bad = np.flatnonzero(pivots <= pivot_tol * scale)
    if bad.size:
        raise NotPositiveDefinite(int(bad[0]), float(pivots[bad[0]]))
    return CholFactor(L, float(2.0 * np.sum(np.log(np.diag(L)))))


def _first_bad_pivot(S):
    # LAPACK does not say where it stopped; find it with leading minors.
    for i in range(1, S.shape[0] + 1):
        try:
            np.linalg.cholesky(S[:i, :i])
        except np.linalg.LinAlgError:
            return i - 1
    return S.shape[0] - 1


def solve(F, b):
    """Solve ``(L L^T) x = b``; ``b`` may be a vector or a matrix of columns."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != F.dim:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, factor has dim {F.dim}")
    z = solve_triangular(F.lower, b, lower=True, check_finite=False)
    return solve_triangular(F.lower.T, z, lower=False, check_finite=False)


def quad_inv(F, x):
    """``x^T A^{-1} x`` for each row of ``x`` (or for a single vector)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != F.dim:
        raise DimensionMismatch(f"vector length {X.shape[1]} != factor dim {F.dim}")
    z = solve_triangular(F.lower, X.T, lower=True, check_finite=False)
    q = np.einsum("ij,ij->j", z, z)
    return float(q[0]) if single else q


def logdet_rank_one(F, c, w, x):
    """``log|c*A + w*x x^T|`` from a factor of ``A`` via the determinant lemma.

    ``x`` may also be a 2-D array of candidate rows with ``w`` a matching
    vector, in which case one value per row is returned.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("w must be nonnegative")
    q = quad_inv(F, x)
    out = F.dim * np.log(c) + F.log_det + np.log1p((w / c) * q)
    return float(out) if np.ndim(out) == 0 else out
