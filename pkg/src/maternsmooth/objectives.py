"""Marginal-likelihood and cross-validation objectives over the smoothness.

Both objectives decompose into a data term plus a complexity term of the
same shape: the quadratic form plus the log-determinant for maximum
likelihood, and the scaled residual sum plus the summed log variances for
leave-one-out cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConditioningError, DomainError
from .gp import (
    DEFAULT_PIVOT_RTOL,
    condition,
    incremental_variances,
    log_det,
    loo,
    quadratic_form,
)
from .kernels import MaternKernel

__all__ = [
    "ObjectiveValue",
    "ell_ml",
    "ell_cv",
    "ell_ml_from",
    "ell_cv_from",
    "VarianceRatioProfile",
    "variance_ratio_profile",
]


@dataclass(frozen=True)
class ObjectiveValue:
    """One objective evaluation split into data and complexity terms."""

    data_term: float
    complexity_term: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.data_term + self.complexity_term)


def _reraise_with_context(err, what, nu, n):
    raise ConditioningError(
        f"{what} failed to condition at nu={nu:g}, n={n}: {err}",
        pivot_index=err.pivot_index,
        pivot_value=err.pivot_value,
    ) from err


def ell_ml_from(post):
    """Maximum-likelihood objective of an already conditioned posterior."""
    return ObjectiveValue(data_term=quadratic_form(post), complexity_term=log_det(post))


def ell_cv_from(post):
    """Cross-validation objective of an already conditioned posterior."""
    if post.n < 2:
        raise DomainError("cross-validation objective needs n >= 2")
    res = loo(post)
    data = float(np.sum(res.residuals**2 / res.variances))
    complexity = float(np.sum(np.log(res.variances)))
    return ObjectiveValue(data_term=data, complexity_term=complexity)


def ell_ml(params, design, y, pivot_rtol=DEFAULT_PIVOT_RTOL):
    """Maximum-likelihood objective of Matern parameters on data.

    ``data_term`` is the quadratic form ``y' K^{-1} y`` and
    ``complexity_term`` the log-determinant of the kernel matrix.
    """
    try:
        post = condition(MaternKernel(params), design, y, pivot_rtol)
    except ConditioningError as err:
        _reraise_with_context(err, "ML objective", params.nu, design.n)
    return ell_ml_from(post)


def ell_cv(params, design, y, pivot_rtol=DEFAULT_PIVOT_RTOL):
    """Leave-one-out cross-validation objective of Matern parameters on data."""
    if design.n < 2:
        raise DomainError("cross-validation objective needs n >= 2")
    try:
        post = condition(MaternKernel(params), design, y, pivot_rtol)
    except ConditioningError as err:
        _reraise_with_context(err, "CV objective", params.nu, design.n)
    return ell_cv_from(post)


def _loo_variances(kernel, design, pivot_rtol):
    """Leave-one-out variances, with the single-point convention V = K(x, x)."""
    if design.n == 1:
        return np.array([kernel(0.0)])
    post = condition(kernel, design, np.zeros(design.n), pivot_rtol)
    return loo(post).variances


@dataclass(frozen=True)
class VarianceRatioProfile:
    """Worst-case variance ratios of a reference smoothness against a grid.

    ``ratios[k]`` is the maximum over design points of
    ``V_nu0(x_i | .) / V_nu(x_i | .)`` for ``nu = nu_grid[k]``, with the
    variances taken either in the leave-one-out sense or against growing
    prefixes (``sequential``).  Cells that failed to condition carry NaN
    and an entry in ``failures``.
    """

    nu_grid: np.ndarray
    ratios: np.ndarray
    failures: tuple


def variance_ratio_profile(nu0, nu_grid, design, probe="loo", sigma=1.0,
                           lambda_=1.0, scaling=None, pivot_rtol=DEFAULT_PIVOT_RTOL):
    """Profile of max variance ratios between ``nu0`` and each grid value."""
    if probe not in ("loo", "sequential"):
        raise DomainError(f"probe must be 'loo' or 'sequential', got {probe!r}")
    grid = np.asarray(list(nu_grid), dtype=float)
    if np.any(grid <= 0):
        raise DomainError("smoothness grid must be positive")

    def make_kernel(nu):
        from .kernels import matern

        return MaternKernel(matern(nu, sigma, lambda_, d=design.d, scaling=scaling))

    def variances(nu):
        k = make_kernel(nu)
        if probe == "loo":
            return _loo_variances(k, design, pivot_rtol)
        return incremental_variances(k, design, pivot_rtol)

    ref = variances(nu0)
    ratios = np.full(grid.shape, math.nan)
    failures = []
    for i, nu in enumerate(grid):
        try:
            ratios[i] = float(np.max(ref / variances(nu)))
        except ConditioningError as err:
            failures.append((float(nu), str(err)))
    return VarianceRatioProfile(nu_grid=grid, ratios=ratios, failures=tuple(failures))
