"""Row-partitioned regression shortcuts.

Every leave-out quantity here is computed from the full-sample fit without
refitting.  The two regimes share one identity that does most of the work::

    beta^(~i) = beta_hat - loo_resid_i * X^dagger e_i

with the LOO residuals given by ``K y / diag(K)`` where ``K`` is ``I - H``
under A1 and the Gram inverse ``(X X^T)^{-1}`` under B1.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike

from .errors import (
    InvalidInput,
    LemmaConditionsNotMet,
    LeverageOne,
    SingularSubmatrix,
)
from .estimator import Design, FitResult, Regime, _result, as_design, fit
from .linalg import Array, as_vector, pinv, pinv_rank_one_downdate, quantile_hat

__all__ = [
    "RowSubset",
    "LooResult",
    "JackknifeResult",
    "IntervalMethod",
    "PredictionInterval",
    "fit_subset",
    "fit_subset_complement_form",
    "loo_beta",
    "loo_residuals",
    "press",
    "online_update",
    "jackknife",
    "loo_predictions",
    "jackknife_interval",
    "jackknife_plus_interval",
]


@dataclass(frozen=True)
class RowSubset:
    """Kept rows ``I`` and dropped rows ``I^c`` (0-based, sorted)."""

    kept: tuple[int, ...]
    dropped: tuple[int, ...]
    n: int

    @classmethod
    def keep(cls, kept: Iterable[int], n: int) -> "RowSubset":
        k = sorted(set(int(i) for i in kept))
        if not k:
            raise InvalidInput("kept row set must be non-empty")
        if k[0] < 0 or k[-1] >= n:
            raise InvalidInput(f"row indices must lie in [0, {n})")
        ks = set(k)
        return cls(tuple(k), tuple(i for i in range(n) if i not in ks), n)

    @classmethod
    def drop(cls, dropped: Iterable[int], n: int) -> "RowSubset":
        ds = set(int(i) for i in dropped)
        if any(i < 0 or i >= n for i in ds):
            raise InvalidInput(f"row indices must lie in [0, {n})")
        return cls.keep((i for i in range(n) if i not in ds), n)


@dataclass(frozen=True, eq=False)
class LooResult:
    loo_residuals: Array
    press: float


@dataclass(frozen=True, eq=False)
class JackknifeResult:
    beta_jack: Array
    v_jack: Array


class IntervalMethod(str, Enum):
    Z_HOMOSKEDASTIC = "ZHomoskedastic"
    JACKKNIFE = "Jackknife"
    JACKKNIFE_PLUS = "JackknifePlus"


@dataclass(frozen=True)
class PredictionInterval:
    lower: float
    upper: float
    method: IntervalMethod
    alpha: float

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def _check_alpha(alpha: float) -> float:
    a = float(alpha)
    if not (0.0 < a < 1.0):
        raise InvalidInput(f"alpha must lie in (0, 1), got {alpha}")
    return a


def _subset_for(subset: RowSubset | Iterable[int], n: int) -> RowSubset:
    if isinstance(subset, RowSubset):
        if subset.n != n:
            raise InvalidInput(f"subset built for n={subset.n}, design has n={n}")
        return subset
    return RowSubset.keep(subset, n)


def fit_subset(
    design: Design | ArrayLike, y: ArrayLike, subset: RowSubset | Iterable[int]
) -> Array:
    """Min-norm fit on rows ``I`` obtained from the full-sample fit.

    Under A1 the dropped block of ``I - H`` is inverted; under B1 the full
    solution is projected onto ``rowsp(X_I)``.
    """
    d = as_design(design)
    regime = d.require(Regime.A1, Regime.B1, what="fit_subset")
    s = _subset_for(subset, d.n)
    res = fit(d, y)
    if not s.dropped:
        return res.beta_hat.copy()
    if regime is Regime.A1:
        ic = np.asarray(s.dropped)
        block = d.pperp[np.ix_(ic, ic)]
        smin = np.linalg.svd(block, compute_uv=False)[-1]
        if smin <= d.tol.div_tol:
            raise SingularSubmatrix(
                f"(I - H) restricted to the dropped rows is singular (smallest singular value {smin:.3e})"
            )
        corr = np.linalg.solve(block, res.residuals[ic])
        return res.beta_hat - d.xtx_pinv @ (d.x[ic].T @ corr)
    xi = d.x[np.asarray(s.kept)]
    return pinv(xi, d.tol) @ (xi @ res.beta_hat)


def fit_subset_complement_form(
    design: Design | ArrayLike, y: ArrayLike, subset: RowSubset | Iterable[int]
) -> Array:
    """B1 only: ``{I - A A^dagger} beta_hat`` with ``A`` the dropped columns of ``X^dagger``."""
    d = as_design(design)
    d.require(Regime.B1, what="fit_subset_complement_form")
    s = _subset_for(subset, d.n)
    res = fit(d, y)
    if not s.dropped:
        return res.beta_hat.copy()
    a = d.pinv[:, np.asarray(s.dropped)]
    # X^dagger has full column rank under B1, so the rank is known
    return res.beta_hat - a @ (pinv(a, d.tol, len(s.dropped)) @ res.beta_hat)


def _check_index(i: int, n: int) -> int:
    i = int(i)
    if not 0 <= i < n:
        raise InvalidInput(f"row index {i} outside [0, {n})")
    return i


def loo_beta(design: Design | ArrayLike, y: ArrayLike, i: int) -> Array:
    """Coefficients of the fit that leaves out row ``i`` (0-based)."""
    d = as_design(design)
    regime = d.require(Regime.A1, Regime.B1, what="loo_beta")
    i = _check_index(i, d.n)
    res = fit(d, y)
    if regime is Regime.A1:
        gap = 1.0 - d.hat_diag[i]
        if gap <= d.tol.div_tol:
            raise LeverageOne(f"observation {i} has leverage 1 - {gap:.3e}")
        return res.beta_hat - res.residuals[i] / gap * (d.xtx_pinv @ d.x[i])
    col = d.pinv[:, i]
    return res.beta_hat - col * (col @ res.beta_hat) / d.gram_inv[i, i]


def _rescaled_kernel(d: Design) -> tuple[Array, Array]:
    """Return ``K`` and ``diag(K)`` for the LOO shortcut, validating the diagonal."""
    regime = d.require(Regime.A1, Regime.B1, what="leave-one-out shortcut")
    k = d.pperp if regime is Regime.A1 else d.gram_inv
    diag = np.diag(k).copy()
    bad = np.flatnonzero(diag <= d.tol.div_tol)
    if bad.size:
        raise LeverageOne(f"observations {bad.tolist()} have leverage numerically equal to one")
    return k, diag


def loo_residual_vector(design: Design, y: Array) -> Array:
    k, diag = _rescaled_kernel(design)
    return (k @ y) / diag


def loo_residuals(design: Design | ArrayLike, y: ArrayLike) -> LooResult:
    d = as_design(design)
    yv = as_vector(y, d.n, "response")
    e = loo_residual_vector(d, yv)
    e.setflags(write=False)
    return LooResult(e, float(e @ e))


def press(loo: LooResult | ArrayLike) -> float:
    e = loo.loo_residuals if isinstance(loo, LooResult) else as_vector(loo)
    return float(e @ e)


def online_update(prev: FitResult, x_new: ArrayLike, y_new: float) -> FitResult:
    """Append one observation and update the coefficients in place of a refit.

    The step is ``beta + e * gamma`` with ``e`` the predicted residual of the
    new point and ``gamma = (X'^T X')^dagger x_new``.  For an A1 design the
    inverse Gram matrix is propagated by Sherman-Morrison and seeded into the
    new design's cache.  Otherwise the rank-one pseudoinverse formula is tried
    and, when its preconditions fail (the usual case for an added row), the
    augmented design's SVD is used.
    """
    d = prev.design
    d.require(Regime.A1, Regime.B1, what="online_update")
    xv = as_vector(x_new, d.p, "x_new")
    yn = float(y_new)
    if not np.isfinite(yn):
        raise InvalidInput("y_new must be finite")
    new = Design(np.vstack([d.x, xv]), d.tol)
    resid = yn - float(xv @ prev.beta_hat)

    if d.regime is Regime.A1:
        a = d.xtx_pinv
        ax = a @ xv
        a_new = a - np.outer(ax, ax) / (1.0 + float(xv @ ax))
        # The augmented design keeps full column rank, so the cache is exact.
        new.__dict__["xtx_pinv"] = a_new
        new.__dict__["regime"] = Regime.A1
    else:
        new.require(Regime.A1, Regime.B1, what="online_update")
        try:
            a_new = pinv_rank_one_downdate(d.x.T @ d.x, d.xtx_pinv, xv, xv, d.tol)
        except LemmaConditionsNotMet:
            a_new = new.xtx_pinv
    beta = prev.beta_hat + resid * (a_new @ xv)
    return _result(new, np.append(prev.y, yn), beta)


def jackknife(design: Design | ArrayLike, y: ArrayLike) -> JackknifeResult:
    """Jackknife point estimate and HC3 variance without refits."""
    d = as_design(design)
    yv = as_vector(y, d.n, "response")
    e = loo_residual_vector(d, yv)
    n = d.n
    beta_hat = d.pinv @ yv
    beta_jack = beta_hat + (n - 1) / n * (d.pinv @ e)
    scaled = d.pinv * e
    v = scaled @ scaled.T
    return JackknifeResult(beta_jack, (v + v.T) / 2)


def loo_predictions(design: Design | ArrayLike, y: ArrayLike, x_new: ArrayLike) -> Array:
    """Entry ``i`` is ``x_new^T beta^(~i)``."""
    d = as_design(design)
    yv = as_vector(y, d.n, "response")
    xv = as_vector(x_new, d.p, "x_new")
    e = loo_residual_vector(d, yv)
    xp = xv @ d.pinv
    return float(xp @ yv) - xp * e


def jackknife_interval(
    design: Design | ArrayLike, y: ArrayLike, x_new: ArrayLike, alpha: float
) -> PredictionInterval:
    a = _check_alpha(alpha)
    d = as_design(design)
    yv = as_vector(y, d.n, "response")
    xv = as_vector(x_new, d.p, "x_new")
    e = loo_residual_vector(d, yv)
    yhat = float(xv @ (d.pinv @ yv))
    r = quantile_hat(np.abs(e), a)
    return PredictionInterval(yhat - r, yhat + r, IntervalMethod.JACKKNIFE, a)


def jackknife_plus_interval(
    design: Design | ArrayLike, y: ArrayLike, x_new: ArrayLike, alpha: float
) -> PredictionInterval:
    a = _check_alpha(alpha)
    d = as_design(design)
    yv = as_vector(y, d.n, "response")
    preds = loo_predictions(d, yv, x_new)
    abs_e = np.abs(loo_residual_vector(d, yv))
    lower = -quantile_hat(-preds + abs_e, a)
    upper = quantile_hat(preds + abs_e, a)
    return PredictionInterval(lower, upper, IntervalMethod.JACKKNIFE_PLUS, a)
