"""SVD-backed pseudoinverse kernels.

All projections and Gram inverses are assembled from one compact SVD, never
from the normal equations.  The rank cutoff follows the usual LAPACK-style
rule ``s < rel_rank_tol * s_max * max(n, p)``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidInput, LemmaConditionsNotMet

__all__ = [
    "Tolerance",
    "Svd",
    "QuantileSpec",
    "as_matrix",
    "as_vector",
    "compact_svd",
    "pinv",
    "proj_colspace",
    "gram_inverse",
    "pinv_rank_one_downdate",
    "quantile_hat",
]

Array = NDArray[np.float64]

# Relative residual allowed when testing membership in a column/row space.
_SUBSPACE_RTOL = 1e-8


@dataclass(frozen=True)
class Tolerance:
    """Numerical tolerance policy shared by every operation.

    Parameters
    ----------
    rel_rank_tol : float
        Singular values below ``rel_rank_tol * s_max * max(n, p)`` count as zero.
    div_tol : float
        Denominators whose magnitude falls below this trigger an error.
    """

    rel_rank_tol: float = float(np.finfo(np.float64).eps)
    div_tol: float = 1e-10

    def __post_init__(self) -> None:
        if not (self.rel_rank_tol > 0 and math.isfinite(self.rel_rank_tol)):
            raise InvalidInput(f"rel_rank_tol must be positive, got {self.rel_rank_tol}")
        if not (self.div_tol > 0 and math.isfinite(self.div_tol)):
            raise InvalidInput(f"div_tol must be positive, got {self.div_tol}")

    @classmethod
    def from_env(cls, environ: dict[str, str] | None = None) -> "Tolerance":
        """Build a policy honouring ``REL_RANK_TOL`` and ``DIV_TOL`` overrides."""
        env = os.environ if environ is None else environ
        kwargs: dict[str, float] = {}
        for key, field in (("REL_RANK_TOL", "rel_rank_tol"), ("DIV_TOL", "div_tol")):
            raw = env.get(key)
            if raw is None or raw.strip() == "":
                continue
            try:
                kwargs[field] = float(raw)
            except ValueError as exc:
                raise InvalidInput(f"{key}={raw!r} is not a number") from exc
        return cls(**kwargs)


DEFAULT_TOL = Tolerance()


@dataclass(frozen=True, eq=False)
class Svd:
    """Compact SVD ``m = u @ diag(s) @ v.T`` truncated at the effective rank."""

    u: Array
    s: Array
    v: Array
    shape: tuple[int, int]

    @property
    def rank(self) -> int:
        return int(self.s.size)

    def pinv(self) -> Array:
        return (self.v / self.s) @ self.u.T


@dataclass(frozen=True)
class QuantileSpec:
    alpha: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha <= 1.0):
            raise InvalidInput(f"alpha must lie in [0, 1], got {self.alpha}")


def as_matrix(m: ArrayLike, name: str = "matrix") -> Array:
    """Validate and return a finite 2-D float array (a private copy)."""
    arr = np.array(m, dtype=np.float64, copy=True)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return arr


def as_vector(v: ArrayLike, length: int | None = None, name: str = "vector") -> Array:
    arr = np.array(v, dtype=np.float64, copy=True).reshape(-1)
    if length is not None and arr.size != length:
        raise InvalidInput(f"{name} has length {arr.size}, expected {length}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return arr


def compact_svd(m: ArrayLike, tol: Tolerance = DEFAULT_TOL, rank: int | None = None) -> Svd:
    """Thin SVD with singular values under the rank cutoff dropped.

    Parameters
    ----------
    m : array_like
        Matrix to decompose.
    tol : Tolerance
        Supplies the relative rank cutoff.
    rank : int, optional
        Known rank.  Products of projectors carry roundoff well above the
        default cutoff, so callers that know the rank algebraically should
        pass it; the decomposition is then truncated to ``rank`` terms.
    """
    a = as_matrix(m)
    n, p = a.shape
    if a.size == 0:
        return Svd(np.zeros((n, 0)), np.zeros(0), np.zeros((p, 0)), (n, p))
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    cutoff = tol.rel_rank_tol * (s[0] if s.size else 0.0) * max(n, p)
    r = int(np.count_nonzero(s > cutoff)) if s.size and s[0] > 0 else 0
    if rank is not None:
        if rank < 0:
            raise InvalidInput(f"rank must be nonnegative, got {rank}")
        r = min(int(rank), s.size)
    return Svd(u[:, :r].copy(), s[:r].copy(), vt[:r].T.copy(), (n, p))


def pinv(m: ArrayLike, tol: Tolerance = DEFAULT_TOL, rank: int | None = None) -> Array:
    """Moore-Penrose pseudoinverse ``V S^{-1} U^T``, optionally at a known rank."""
    return compact_svd(m, tol, rank).pinv()


def proj_colspace(m: ArrayLike, tol: Tolerance = DEFAULT_TOL, complement: bool = False) -> Array:
    """Orthogonal projector onto ``colsp(m)``, or onto its complement."""
    svd = compact_svd(m, tol)
    proj = svd.u @ svd.u.T
    if complement:
        return np.eye(svd.shape[0]) - proj
    return proj


def gram_inverse(m: ArrayLike, tol: Tolerance = DEFAULT_TOL) -> Array:
    """``(m m^T)^dagger`` computed as ``U S^{-2} U^T``."""
    svd = compact_svd(m, tol)
    return (svd.u / svd.s**2) @ svd.u.T


def _vec_pinv(x: Array) -> Array:
    """Pseudoinverse of a column vector, returned as a flat row."""
    nrm2 = float(x @ x)
    return x / nrm2 if nrm2 > 0 else np.zeros_like(x)


def _in_range(basis_proj: Array, x: Array) -> bool:
    resid = x - basis_proj @ x
    return float(np.linalg.norm(resid)) <= _SUBSPACE_RTOL * max(1.0, float(np.linalg.norm(x)))


def pinv_rank_one_downdate(
    a: ArrayLike,
    a_pinv: ArrayLike,
    c: ArrayLike,
    d: ArrayLike,
    tol: Tolerance = DEFAULT_TOL,
) -> Array:
    """Pseudoinverse of ``a + c d^T`` in the singular rank-one case.

    Valid only when ``c`` lies in ``colsp(a)``, ``d`` lies in ``rowsp(a)`` and
    ``1 + d^T a^dagger c = 0``; the perturbation then strictly lowers the rank.

    Raises
    ------
    LemmaConditionsNotMet
        If any precondition fails.  Callers should fall back to a fresh SVD.
    """
    a = as_matrix(a, "a")
    ap = as_matrix(a_pinv, "a_pinv")
    n, p = a.shape
    if ap.shape != (p, n):
        raise InvalidInput(f"a_pinv has shape {ap.shape}, expected {(p, n)}")
    c = as_vector(c, n, "c")
    d = as_vector(d, p, "d")

    if not _in_range(a @ ap, c):
        raise LemmaConditionsNotMet("c is not in the column space of a")
    if not _in_range(ap @ a, d):
        raise LemmaConditionsNotMet("d is not in the row space of a")
    k = ap @ c
    h = ap.T @ d
    gap = 1.0 + float(d @ k)
    if abs(gap) > tol.div_tol:
        raise LemmaConditionsNotMet(f"1 + d^T a^+ c = {gap:.3e} is not zero")

    k_dag = _vec_pinv(k)
    h_dag = _vec_pinv(h)
    return (
        ap
        - np.outer(k, k_dag @ ap)
        - np.outer(ap @ h_dag, h)
        + float(k_dag @ ap @ h_dag) * np.outer(k, h)
    )


def quantile_hat(values: Iterable[float] | ArrayLike, alpha: float | QuantileSpec) -> float:
    """Finite-sample corrected upper quantile.

    Returns the ``ceil((1 - alpha)(m + 1))``-th smallest of the ``m`` values,
    or ``+inf`` when ``alpha < 1/(m + 1)``.  The rank is clamped at 1 so that
    ``alpha = 1`` yields the minimum.
    """
    spec = alpha if isinstance(alpha, QuantileSpec) else QuantileSpec(float(alpha))
    r = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64)
    r = r.reshape(-1)
    m = r.size
    if m == 0:
        raise InvalidInput("quantile_hat needs at least one value")
    # Rounding guards against products such as 0.8 * 5 landing a hair above 4.
    rank = math.ceil(round((1.0 - spec.alpha) * (m + 1), 9))
    if rank > m:
        return math.inf
    rank = max(rank, 1)
    return float(np.partition(r, rank - 1)[rank - 1])
