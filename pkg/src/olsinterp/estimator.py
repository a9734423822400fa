"""Minimum-norm least squares fits and the design-matrix type."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from .errors import InvalidInput, RegimeMismatch
from .linalg import DEFAULT_TOL, Array, Svd, Tolerance, as_matrix, as_vector, compact_svd

__all__ = ["Regime", "Design", "FitResult", "as_design", "fit", "predict", "fit_gls"]


class Regime(str, Enum):
    """Rank regime of a design matrix."""

    A1 = "A1"  # full column rank, n > p
    B1 = "B1"  # full row rank, n <= p
    DEGENERATE = "Degenerate"

    @property
    def label(self) -> str:
        return {
            Regime.A1: "A1 (full column rank)",
            Regime.B1: "B1 (full row rank)",
            Regime.DEGENERATE: "degenerate (rank < min(n, p))",
        }[self]


@dataclass(frozen=True, eq=False)
class Design:
    """A dense design matrix with a lazily computed, cached SVD.

    Instances are immutable: the stored matrix is a private read-only copy,
    and every derived factor is computed at most once.  Sharing a ``Design``
    across threads or processes is safe.
    """

    x: Array
    tol: Tolerance = field(default=DEFAULT_TOL)

    def __post_init__(self) -> None:
        x = as_matrix(self.x, "design")
        if x.shape[0] == 0 or x.shape[1] == 0:
            raise InvalidInput(f"design must be non-empty, got shape {x.shape}")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @cached_property
    def svd(self) -> Svd:
        return compact_svd(self.x, self.tol)

    @property
    def rank(self) -> int:
        return self.svd.rank

    @cached_property
    def regime(self) -> Regime:
        if self.rank == self.p and self.n > self.p:
            return Regime.A1
        if self.rank == self.n and self.n <= self.p:
            return Regime.B1
        return Regime.DEGENERATE

    def require(self, *regimes: Regime, what: str = "operation") -> Regime:
        if self.regime not in regimes:
            wanted = " or ".join(r.label for r in regimes)
            raise RegimeMismatch(
                f"{what} requires {wanted}; design {self.n}x{self.p} has rank {self.rank} "
                f"and is {self.regime.label}",
                assumption="/".join(r.value for r in regimes),
            )
        return self.regime

    # Factors derived from the one SVD -------------------------------------

    @cached_property
    def pinv(self) -> Array:
        """``X^dagger``, shape ``(p, n)``."""
        return self.svd.pinv()

    @cached_property
    def xtx_pinv(self) -> Array:
        """``(X^T X)^dagger = V S^{-2} V^T``."""
        v, s = self.svd.v, self.svd.s
        return (v / s**2) @ v.T

    @cached_property
    def gram_inv(self) -> Array:
        """``G_X = (X X^T)^dagger = U S^{-2} U^T``."""
        u, s = self.svd.u, self.svd.s
        return (u / s**2) @ u.T

    @cached_property
    def pperp(self) -> Array:
        """``I - X X^dagger``."""
        u = self.svd.u
        return np.eye(self.n) - u @ u.T

    @cached_property
    def hat_diag(self) -> Array:
        """Leverages ``H_ii = x_i^T (X^T X)^dagger x_i``, without forming ``H``."""
        return np.einsum("ij,ij->i", self.svd.u, self.svd.u)

    @cached_property
    def rowspace_proj(self) -> Array:
        """``X^dagger X``, the projector onto ``rowsp(X)``."""
        v = self.svd.v
        return v @ v.T

    def rows(self, idx: Sequence[int] | Array) -> "Design":
        return Design(self.x[np.asarray(idx, dtype=int)], self.tol)

    def cols(self, idx: Sequence[int] | Array) -> "Design":
        return Design(self.x[:, np.asarray(idx, dtype=int)], self.tol)


def as_design(x: "Design | ArrayLike", tol: Tolerance | None = None) -> Design:
    if isinstance(x, Design):
        if tol is not None and tol != x.tol:
            return Design(x.x, tol)
        return x
    return Design(as_matrix(x, "design"), tol or DEFAULT_TOL)


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of a minimum-norm least squares fit.

    ``gram_inv`` is populated only under B1 and ``pperp`` only under A1;
    the other factors are available in every regime.
    """

    design: Design
    y: Array
    beta_hat: Array
    fitted: Array
    residuals: Array

    @property
    def regime(self) -> Regime:
        return self.design.regime

    @property
    def hat_diag(self) -> Array:
        return self.design.hat_diag

    @property
    def pinv_x(self) -> Array:
        return self.design.pinv

    @property
    def gram_inv(self) -> Array | None:
        return self.design.gram_inv if self.regime is Regime.B1 else None

    @property
    def pperp(self) -> Array | None:
        return self.design.pperp if self.regime is Regime.A1 else None


def _result(design: Design, y: Array, beta: Array) -> FitResult:
    fitted = design.x @ beta
    for arr in (y, beta, fitted):
        arr.setflags(write=False)
    resid = y - fitted
    resid.setflags(write=False)
    return FitResult(design, y, beta, fitted, resid)


def fit(design: Design | ArrayLike, y: ArrayLike) -> FitResult:
    """Minimum Euclidean-norm least squares solution ``beta = X^dagger y``."""
    d = as_design(design)
    yv = as_vector(y, d.n, "response")
    return _result(d, yv, d.pinv @ yv)


def predict(result: FitResult, x_new: ArrayLike) -> float:
    xv = as_vector(x_new, result.design.p, "x_new")
    return float(xv @ result.beta_hat)


def _inverse_sqrt_psd(sigma: Array, div_tol: float) -> Array:
    if sigma.shape[0] != sigma.shape[1]:
        raise InvalidInput(f"sigma must be square, got {sigma.shape}")
    if not np.allclose(sigma, sigma.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(sigma).max())):
        raise InvalidInput("sigma must be symmetric")
    w, q = np.linalg.eigh((sigma + sigma.T) / 2)
    if w[0] <= div_tol:
        raise InvalidInput(f"sigma is not positive definite (smallest eigenvalue {w[0]:.3e})")
    return (q / np.sqrt(w)) @ q.T


def fit_gls(design: Design | ArrayLike, y: ArrayLike, sigma: ArrayLike) -> FitResult:
    """Fit on whitened data ``(Sigma^{-1/2} X, Sigma^{-1/2} y)``.

    The inverse square root comes from the symmetric eigendecomposition of
    ``sigma``.  The returned result refers to the whitened design.
    """
    d = as_design(design)
    yv = as_vector(y, d.n, "response")
    s = as_matrix(sigma, "sigma")
    if s.shape != (d.n, d.n):
        raise InvalidInput(f"sigma has shape {s.shape}, expected {(d.n, d.n)}")
    root = _inverse_sqrt_psd(s, d.tol.div_tol)
    return fit(Design(root @ d.x, d.tol), root @ yv)
