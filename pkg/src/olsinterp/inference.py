"""Moments, the LOO variance estimator, z-intervals and Gauss-Markov checks.

Under full row rank only ``beta* = X^dagger X beta`` is identifiable, so
``beta*`` is the estimand throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import ndtri

from .errors import InvalidInput, NotAValidInverse
from .estimator import Design, Regime, as_design
from .linalg import Array, as_matrix, as_vector
from .rowops import IntervalMethod, PredictionInterval, _check_alpha, _rescaled_kernel

__all__ = [
    "GaussMarkovModel",
    "VarianceEstimate",
    "GaussMarkovReport",
    "beta_moments",
    "sigma2_hat",
    "sigma2_hat_expectation",
    "prediction_ci",
    "gauss_markov_compare",
    "z_quantile",
]

INVERSE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class GaussMarkovModel:
    """``y = X beta + eps`` with ``Cov(eps) = sigma2 * I``."""

    design: Design
    beta: Array
    sigma2: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", as_vector(self.beta, self.design.p, "beta"))
        if not self.sigma2 > 0:
            raise InvalidInput(f"sigma2 must be positive, got {self.sigma2}")

    @cached_property
    def beta_star(self) -> Array:
        return self.design.rowspace_proj @ self.beta


@dataclass(frozen=True)
class VarianceEstimate:
    sigma2_hat: float
    denominator: float
    regime: Regime


def beta_moments(model: GaussMarkovModel) -> tuple[Array, Array]:
    """Mean and covariance of ``X^dagger y`` under the model."""
    xp = model.design.pinv
    return model.beta_star.copy(), model.sigma2 * (xp @ xp.T)


def _loo_operator(d: Design) -> tuple[Array, float]:
    """``D^{-1} K`` and its squared Frobenius norm, cached on the design."""
    cache = d.__dict__
    if "_loo_operator" not in cache:
        k, diag = _rescaled_kernel(d)
        op = k / diag[:, None]
        op.setflags(write=False)
        cache["_loo_operator"] = (op, float(np.sum(op * op)))
    return cache["_loo_operator"]


def sigma2_hat(design: Design | ArrayLike, y: ArrayLike) -> VarianceEstimate:
    """PRESS divided by ``||D^{-1} K||_F^2``.

    Unbiased under A1; under B1 it overshoots by a nonnegative amount that
    depends on ``beta*`` (see :func:`sigma2_hat_expectation`).
    """
    d = as_design(design)
    yv = as_vector(y, d.n, "response")
    op, den = _loo_operator(d)
    e = op @ yv
    return VarianceEstimate(float(e @ e) / den, den, d.regime)


def sigma2_hat_expectation(design: Design | ArrayLike, beta: ArrayLike, sigma2: float) -> float:
    """Exact ``E[sigma2_hat]`` for known ``beta`` and homoskedastic noise."""
    d = as_design(design)
    op, den = _loo_operator(d)
    b = as_vector(beta, d.p, "beta")
    mean_e = op @ (d.x @ (d.rowspace_proj @ b))
    return float(sigma2) + float(mean_e @ mean_e) / den


def z_quantile(alpha: float) -> float:
    """Upper ``alpha/2`` standard-normal quantile."""
    return float(ndtri(1.0 - alpha / 2.0))


def prediction_ci(
    design: Design | ArrayLike, y: ArrayLike, x_new: ArrayLike, alpha: float
) -> PredictionInterval:
    """Normal-theory interval for ``x_new^T beta*`` centred at the fitted value."""
    a = _check_alpha(alpha)
    d = as_design(design)
    yv = as_vector(y, d.n, "response")
    xv = as_vector(x_new, d.p, "x_new")
    s2 = sigma2_hat(d, yv).sigma2_hat
    proj = (d.svd.v.T @ xv) / d.svd.s
    quad = float(proj @ proj)
    yhat = float(xv @ (d.pinv @ yv))
    half = z_quantile(a) * np.sqrt(s2 * quad)
    return PredictionInterval(yhat - half, yhat + half, IntervalMethod.Z_HOMOSKEDASTIC, a)


@dataclass(frozen=True, eq=False)
class GaussMarkovReport:
    regime: Regime
    cov_ols: Array
    cov_competitor: Array
    difference: Array
    trace_gap: float
    trace_ok: bool
    rowspace_gaps: Array | None
    rowspace_min_eig: float | None
    rowspace_ok: bool | None
    loewner_min_eig: float | None
    loewner_ok: bool | None

    @property
    def dominated(self) -> bool:
        checks = [self.trace_ok, self.rowspace_ok, self.loewner_ok]
        return all(c for c in checks if c is not None)


def gauss_markov_compare(
    design: Design | ArrayLike, competitor: ArrayLike, sigma2: float = 1.0
) -> GaussMarkovReport:
    """Compare ``Cov(X^dagger y)`` with ``Cov(M y)`` for a linear competitor ``M``.

    Under A1 ``M`` must be a left inverse and a full Loewner comparison is made.
    Under B1 ``M`` must be a right inverse and only the trace and quadratic forms
    on ``rowsp(X)`` are compared; a Loewner ordering can fail there.
    """
    d = as_design(design)
    m = as_matrix(competitor, "competitor")
    if m.shape != (d.p, d.n):
        raise InvalidInput(f"competitor has shape {m.shape}, expected {(d.p, d.n)}")
    if not sigma2 > 0:
        raise InvalidInput("sigma2 must be positive")
    regime = d.require(Regime.A1, Regime.B1, what="gauss_markov_compare")
    if regime is Regime.A1:
        gap = np.max(np.abs(m @ d.x - np.eye(d.p)))
        if gap > INVERSE_TOL:
            raise NotAValidInverse(f"M X differs from I_p by {gap:.3e}")
    else:
        gap = np.max(np.abs(d.x @ m - np.eye(d.n)))
        if gap > INVERSE_TOL:
            raise NotAValidInverse(f"X M differs from I_n by {gap:.3e}")

    xp = d.pinv
    cov_ols = sigma2 * (xp @ xp.T)
    cov_m = sigma2 * (m @ m.T)
    diff = cov_m - cov_ols
    diff = (diff + diff.T) / 2
    slack = 1e-9 * max(1.0, float(np.abs(cov_m).max()))
    trace_gap = float(np.trace(diff))
    report = dict(trace_gap=trace_gap, trace_ok=trace_gap >= -slack)
    if regime is Regime.A1:
        min_eig = float(np.linalg.eigvalsh(diff)[0])
        report.update(
            rowspace_gaps=None, rowspace_min_eig=None, rowspace_ok=None,
            loewner_min_eig=min_eig, loewner_ok=min_eig >= -slack,
        )
    else:
        v = d.svd.v
        restricted = v.T @ diff @ v
        gaps = np.diag(restricted).copy()
        min_eig = float(np.linalg.eigvalsh((restricted + restricted.T) / 2)[0])
        report.update(
            rowspace_gaps=gaps, rowspace_min_eig=min_eig,
            rowspace_ok=bool(gaps.min() >= -slack and min_eig >= -slack),
            loewner_min_eig=None, loewner_ok=None,
        )
    return GaussMarkovReport(regime, cov_ols, cov_m, diff, **report)
