"""Exact Gaussian process conditioning through a single Cholesky factor.

Everything downstream of :func:`condition` (posterior mean and variance,
leave-one-out residuals, incremental variances, log-determinant and
quadratic form) is derived from one factorization per (kernel, design)
pair; refitting on subsets is kept only as an oracle in the test suite.

There is no nugget or jitter anywhere: the model interpolates noiseless
data, and a factorization failure is surfaced as
:class:`~maternsmooth.errors.ConditioningError` rather than silently
regularized.  Pivots are additionally checked against a small relative
threshold so that factorizations whose trailing pivots are pure rounding
noise are rejected instead of producing garbage downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as _linalg

from .errors import ConditioningError, DomainError
from .kernels import kernel_matrix

__all__ = [
    "Posterior",
    "LooResult",
    "condition",
    "posterior_mean",
    "posterior_var",
    "incremental_variances",
    "loo",
    "log_det",
    "quadratic_form",
    "sequential_expansion",
    "trace_ratio",
    "DEFAULT_PIVOT_RTOL",
]

# Relative pivot floor: computed pivots below this multiple of the largest
# kernel diagonal entry are indistinguishable from accumulated rounding and
# the factorization is rejected.
DEFAULT_PIVOT_RTOL = 1e-14

# Negative posterior variances within this relative window are rounding
# artefacts at near-data probes and are clamped to zero; anything below
# signals a genuine conditioning problem.
_VAR_CLAMP_RTOL = 1e-12


def _find_bad_pivot(K):
    """Locate the first non-positive pivot by running the factorization rowwise."""
    n = K.shape[0]
    L = np.zeros_like(K)
    for j in range(n):
        s = K[j, j] - np.dot(L[j, :j], L[j, :j])
        if not (s > 0.0) or not math.isfinite(s):
            return j, float(s)
        L[j, j] = math.sqrt(s)
        if j + 1 < n:
            L[j + 1 :, j] = (K[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return n - 1, float(L[n - 1, n - 1] ** 2)


def _cholesky(K, pivot_rtol):
    n = K.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    try:
        L = _linalg.cholesky(K, lower=True, check_finite=False)
    except _linalg.LinAlgError:
        idx, val = _find_bad_pivot(K)
        raise ConditioningError(
            f"kernel matrix is numerically singular: pivot {idx} = {val:.3e}",
            pivot_index=idx,
            pivot_value=val,
        ) from None
    piv = np.diag(L) ** 2
    floor = pivot_rtol * float(np.max(np.diag(K)))
    small = np.nonzero(piv < floor)[0]
    if small.size:
        idx = int(small[0])
        raise ConditioningError(
            f"pivot {idx} = {piv[idx]:.3e} below relative floor {floor:.3e}",
            pivot_index=idx,
            pivot_value=float(piv[idx]),
        )
    return L


@dataclass(frozen=True)
class Posterior:
    """A conditioned Gaussian process: Cholesky factor plus weight vector.

    Immutable after construction; safe to share across threads for
    concurrent mean/variance queries.
    """

    kernel: object
    design: object
    y: np.ndarray
    chol: np.ndarray
    weights: np.ndarray

    @property
    def n(self):
        return self.y.shape[0]


def condition(kernel, design, y, pivot_rtol=DEFAULT_PIVOT_RTOL):
    """Factorize the kernel matrix of a design and solve for the weights.

    Raises :class:`ConditioningError` carrying the index and magnitude of
    the first offending pivot when the matrix is numerically singular.
    An empty design is allowed and produces the unconditioned process.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (design.n,):
        raise DomainError(f"y has shape {y.shape}, expected ({design.n},)")
    K = kernel_matrix(kernel, design)
    L = _cholesky(K, pivot_rtol)
    if design.n:
        weights = _linalg.cho_solve((L, True), y, check_finite=False)
    else:
        weights = np.zeros(0)
    return Posterior(kernel=kernel, design=design, y=y.copy(), chol=L, weights=weights)


def _cross_covariances(post, x):
    """Covariance vectors K(x_i, x) for query points x, shape (n, m)."""
    pts = post.design.points
    q = np.atleast_2d(np.asarray(x, dtype=float))
    if q.shape[1] != pts.shape[1] and q.shape[0] == pts.shape[1]:
        q = q.T
    diff = pts[:, None, :] - q[None, :, :]
    return post.kernel(np.sqrt(np.sum(diff * diff, axis=-1)))


def _as_query(post, x):
    d = post.design.d
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        if d != 1:
            raise DomainError("scalar query point in a multi-dimensional domain")
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if d == 1:
            return arr.reshape(-1, 1), False
        if arr.shape[0] == d:
            return arr.reshape(1, d), True
        raise DomainError(f"query shape {arr.shape} does not match dimension {d}")
    return arr, False


def posterior_mean(post, x):
    """Conditional mean at one query point or an (m, d) array of them."""
    q, scalar = _as_query(post, x)
    if post.n == 0:
        out = np.zeros(q.shape[0])
        return float(out[0]) if scalar else out
    k = _cross_covariances(post, q)
    out = k.T @ post.weights
    return float(out[0]) if scalar else out


def posterior_var(post, x):
    """Conditional variance at one query point or an (m, d) array of them.

    Tiny negative values produced by rounding at near-data probes are
    clamped to zero; negativity beyond the clamp window raises
    :class:`ConditioningError`.
    """
    q, scalar = _as_query(post, x)
    prior = post.kernel(0.0)
    if post.n == 0:
        out = np.full(q.shape[0], prior)
        return float(out[0]) if scalar else out
    k = _cross_covariances(post, q)
    c = _linalg.solve_triangular(post.chol, k, lower=True, check_finite=False)
    out = prior - np.sum(c * c, axis=0)
    negative = out < 0.0
    if np.any(out < -_VAR_CLAMP_RTOL * prior):
        worst = float(out.min())
        raise ConditioningError(
            f"posterior variance {worst:.3e} below clamp window", pivot_value=worst
        )
    out[negative] = 0.0
    return float(out[0]) if scalar else out


def log_det(post):
    """Log-determinant of the kernel matrix, from the Cholesky diagonal."""
    return 2.0 * float(np.sum(np.log(np.diag(post.chol))))


def quadratic_form(post):
    """Data quadratic form y' K^{-1} y; also the squared norm of the mean."""
    e = _linalg.solve_triangular(post.chol, post.y, lower=True, check_finite=False)
    return float(np.dot(e, e))


def incremental_variances(kernel, design, pivot_rtol=DEFAULT_PIVOT_RTOL):
    """Variances of each point given its predecessors, in design order.

    Entry ``i`` equals the posterior variance at ``x_i`` of the process
    conditioned on the prefix ``x_1 .. x_{i-1}`` (the empty prefix gives
    the prior variance).  All ``n`` values come from one factorization:
    they are the squared Cholesky pivots.
    """
    K = kernel_matrix(kernel, design)
    L = _cholesky(K, pivot_rtol)
    return np.diag(L) ** 2


def sequential_expansion(kernel, design, y, pivot_rtol=DEFAULT_PIVOT_RTOL):
    """Prediction residuals and variances against growing prefixes.

    Returns ``(residuals, variances)`` where term ``i`` uses the posterior
    conditioned on the first ``i - 1`` points.  The sum of
    ``residual**2 / variance`` equals the quadratic form of the full
    posterior.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (design.n,):
        raise DomainError(f"y has shape {y.shape}, expected ({design.n},)")
    K = kernel_matrix(kernel, design)
    L = _cholesky(K, pivot_rtol)
    e = _linalg.solve_triangular(L, y, lower=True, check_finite=False)
    piv = np.diag(L)
    return piv * e, piv**2


@dataclass(frozen=True)
class LooResult:
    """Leave-one-out residuals and variances, one entry per design point."""

    residuals: np.ndarray
    variances: np.ndarray


def loo(post):
    """Leave-one-out quantities from the inverse-diagonal identities.

    ``residual_i = (K^{-1} y)_i / (K^{-1})_{ii}`` is the gap between the
    held-out value and the mean refit on the remaining points, and
    ``variance_i = 1 / (K^{-1})_{ii}`` the matching variance.  Verified
    against per-point refits in the test suite.
    """
    if post.n < 2:
        raise DomainError("leave-one-out needs at least 2 points")
    inv = _linalg.cho_solve((post.chol, True), np.eye(post.n), check_finite=False)
    diag = np.diag(inv)
    if np.any(diag <= 0.0):
        idx = int(np.argmin(diag))
        raise ConditioningError(
            f"inverse diagonal entry {idx} is not positive",
            pivot_index=idx,
            pivot_value=float(diag[idx]),
        )
    return LooResult(residuals=post.weights / diag, variances=1.0 / diag)


def trace_ratio(kernel0, kernel1, design, pivot_rtol=DEFAULT_PIVOT_RTOL):
    """Normalised trace ``tr[K_0 K_1^{-1}] / n`` of two kernels on a design."""
    if design.n == 0:
        raise DomainError("trace ratio of an empty design")
    K0 = kernel_matrix(kernel0, design)
    K1 = kernel_matrix(kernel1, design)
    L = _cholesky(K1, pivot_rtol)
    M = _linalg.cho_solve((L, True), K0, check_finite=False)
    return float(np.trace(M)) / design.n
