"""Column-partitioned regression.

The columns of ``X`` split into a block ``W = X[:, J]`` and its complement
``T = X[:, J^c]``.  Assumption B2 asks for ``rank(W) = n`` together with
``rank(T) = |J^c|``; it implies that ``X`` itself has full row rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike

from .errors import AssumptionViolated, ConstantTreatment, InvalidInput, ZeroDegreesOfFreedom
from .estimator import Design, Regime, as_design
from .linalg import Array, Tolerance, as_matrix, as_vector, compact_svd, pinv

__all__ = [
    "ColSplit",
    "CochranTriple",
    "CochranReport",
    "OvbReport",
    "PartialRegResult",
    "PartialVariance",
    "cochran",
    "predictive_cochran_gap",
    "omitted_variable_bias",
    "partial_regularized",
    "fwl_matrix_identity_check",
    "ate_estimate",
    "partial_variance_estimators",
]

COCHRAN_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ColSplit:
    """Partition of the columns of a design into ``J`` and ``J^c`` (0-based)."""

    j: tuple[int, ...]
    jc: tuple[int, ...]
    w: Array
    t: Array
    tol: Tolerance

    @classmethod
    def from_indices(cls, design: Design | ArrayLike, j: Iterable[int]) -> "ColSplit":
        d = as_design(design)
        js = sorted(set(int(i) for i in j))
        if not js:
            raise InvalidInput("J must be non-empty")
        if js[0] < 0 or js[-1] >= d.p:
            raise InvalidInput(f"column indices must lie in [0, {d.p})")
        jset = set(js)
        jc = [i for i in range(d.p) if i not in jset]
        w = d.x[:, js].copy()
        t = d.x[:, jc].copy()
        return cls(tuple(js), tuple(jc), w, t, d.tol)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @cached_property
    def rank_w(self) -> int:
        return compact_svd(self.w, self.tol).rank

    @cached_property
    def rank_t(self) -> int:
        return compact_svd(self.t, self.tol).rank if self.t.shape[1] else 0

    @cached_property
    def rank_x(self) -> int:
        return compact_svd(np.hstack([self.w, self.t]), self.tol).rank

    @property
    def rank_resid_w(self) -> int:
        """``rank(P_T^perp W) = rank(X) - rank(T)``."""
        return self.rank_x - self.rank_t

    @property
    def rank_resid_t(self) -> int:
        """``rank(P_W^perp T) = rank(X) - rank(W)``."""
        return self.rank_x - self.rank_w

    @cached_property
    def b2_satisfied(self) -> bool:
        return self.rank_w == self.n and self.rank_t == len(self.jc)

    @cached_property
    def w_pinv(self) -> Array:
        return pinv(self.w, self.tol)

    @cached_property
    def pperp_t(self) -> Array:
        if not self.jc:
            return np.eye(self.n)
        u = compact_svd(self.t, self.tol).u
        return np.eye(self.n) - u @ u.T

    @cached_property
    def pperp_w(self) -> Array:
        u = compact_svd(self.w, self.tol).u
        return np.eye(self.n) - u @ u.T

    def require_b2(self, what: str) -> None:
        if not self.b2_satisfied:
            raise AssumptionViolated(
                f"{what} requires B2: rank(W) = {self.rank_w} (need n = {self.n}), "
                f"rank(T) = {self.rank_t} (need |J^c| = {len(self.jc)})",
                assumption="B2",
            )


def _split_for(design: Design, split: ColSplit | Iterable[int]) -> ColSplit:
    if isinstance(split, ColSplit):
        if split.w.shape[0] != design.n or len(split.j) + len(split.jc) != design.p:
            raise InvalidInput("column split does not match the design")
        return split
    return ColSplit.from_indices(design, split)


@dataclass(frozen=True, eq=False)
class CochranTriple:
    alpha_hat: Array
    beta_hat: Array
    delta_hat: Array


@dataclass(frozen=True, eq=False)
class CochranReport:
    triple: CochranTriple
    direct_term: Array
    bias_term: Array
    deviation: float
    predictive_deviation: float
    holds: bool
    setting: str  # "classical" or "high-dimensional"


def predictive_cochran_gap(
    w: ArrayLike,
    alpha: ArrayLike,
    beta_j: ArrayLike,
    beta_jc: ArrayLike,
    delta: ArrayLike,
) -> float:
    """Norm of ``W alpha - W (beta_J + Delta beta_Jc)`` for any solution triple."""
    wm = as_matrix(w, "w")
    dm = np.asarray(delta, dtype=float).reshape(wm.shape[1], -1)
    pred = np.asarray(beta_j, float) + dm @ np.asarray(beta_jc, float).reshape(-1)
    return float(np.linalg.norm(wm @ (np.asarray(alpha, float) - pred)))


def cochran(design: Design | ArrayLike, y: ArrayLike, split: ColSplit | Iterable[int]) -> CochranReport:
    """Short-versus-long regression decomposition with min-norm solutions."""
    d = as_design(design)
    yv = as_vector(y, d.n, "response")
    s = _split_for(d, split)
    if d.regime is Regime.A1:
        setting = "classical"
    elif s.b2_satisfied:
        setting = "high-dimensional"
    else:
        raise AssumptionViolated(
            "Cochran decomposition requires A1 (classical) or B2 (high-dimensional); "
            f"design is {d.regime.label}, rank(W) = {s.rank_w}, rank(T) = {s.rank_t}",
            assumption="A1/B2",
        )
    alpha_hat = s.w_pinv @ yv
    beta_hat = d.pinv @ yv
    delta_hat = s.w_pinv @ s.t
    j, jc = np.asarray(s.j), np.asarray(s.jc, dtype=int)
    direct = beta_hat[j]
    bias = delta_hat @ beta_hat[jc]
    scale = max(1.0, float(np.linalg.norm(alpha_hat)))
    dev = float(np.max(np.abs(alpha_hat - direct - bias))) if alpha_hat.size else 0.0
    pgap = predictive_cochran_gap(s.w, alpha_hat, direct, beta_hat[jc], delta_hat)
    return CochranReport(
        CochranTriple(alpha_hat, beta_hat, delta_hat),
        direct,
        bias,
        dev,
        pgap,
        dev <= COCHRAN_TOL * scale,
        setting,
    )


@dataclass(frozen=True, eq=False)
class OvbReport:
    observed: tuple[int, ...]
    omitted: tuple[int, ...]
    bias: Array
    short_coef: Array
    long_coef_observed: Array
    cochran: CochranReport


def omitted_variable_bias(
    design: Design | ArrayLike,
    y: ArrayLike,
    observed: Iterable[int],
    omitted: Iterable[int],
) -> OvbReport:
    """Bias of the short regression on ``observed`` caused by leaving out ``omitted``."""
    d = as_design(design)
    obs = sorted(set(int(i) for i in observed))
    mis = sorted(set(int(i) for i in omitted))
    if set(obs) & set(mis) or sorted(obs + mis) != list(range(d.p)):
        raise InvalidInput("observed and omitted must partition the columns")
    rep = cochran(d, y, ColSplit.from_indices(d, obs))
    return OvbReport(tuple(obs), tuple(mis), rep.bias_term, rep.triple.alpha_hat, rep.direct_term, rep)


@dataclass(frozen=True, eq=False)
class PartialRegResult:
    """Blocks of the ``J``-partially regularized solution.

    ``beta_jc`` is ``None`` when only B1 holds, because the ``J^c`` block is
    then not unique.
    """

    beta_j: Array
    beta_jc: Array | None

    @property
    def beta_jc_available(self) -> bool:
        return self.beta_jc is not None

    def assemble(self, split: ColSplit) -> Array:
        if self.beta_jc is None:
            raise AssumptionViolated("J^c block unavailable without B2", assumption="B2")
        out = np.empty(len(split.j) + len(split.jc))
        out[list(split.j)] = self.beta_j
        out[list(split.jc)] = self.beta_jc
        return out


def partial_regularized(
    design: Design | ArrayLike, y: ArrayLike, split: ColSplit | Iterable[int]
) -> PartialRegResult:
    """Least squares solution with the smallest ``J``-block norm.

    Both blocks come from the residualized (Frisch-Waugh-Lovell) formulas.
    When ``X`` has full column rank the solution is unique and does not
    depend on ``J``.
    """
    d = as_design(design)
    yv = as_vector(y, d.n, "response")
    s = _split_for(d, split)
    tol = d.tol
    full_col = d.rank == d.p
    if not (full_col or d.regime is Regime.B1):
        raise AssumptionViolated(
            f"partial regression needs full column or full row rank; design is {d.regime.label}",
            assumption="A1/B1",
        )
    rw = s.pperp_t @ s.w
    beta_j = pinv(rw, tol, s.rank_resid_w) @ (s.pperp_t @ yv)
    if not s.jc:
        return PartialRegResult(beta_j, np.zeros(0))
    if full_col:
        rt = s.pperp_w @ s.t
        return PartialRegResult(beta_j, pinv(rt, tol, s.rank_resid_t) @ (s.pperp_w @ yv))
    if not s.b2_satisfied:
        return PartialRegResult(beta_j, None)
    wt = s.w_pinv @ s.t
    return PartialRegResult(beta_j, pinv(wt, tol, len(s.jc)) @ (s.w_pinv @ yv))


def fwl_matrix_identity_check(
    split: ColSplit, tol: Tolerance | None = None, threshold: float = 1e-8
) -> tuple[bool, float]:
    """Compare ``(P_T^perp W)^dagger P_T^perp`` with ``P_{W^T} P^perp_{W^dagger T} W^dagger``.

    Returns whether the max entrywise deviation is below ``threshold``, and
    the deviation.
    """
    tol = tol or split.tol
    split.require_b2("the FWL matrix identity")
    lhs = pinv(split.pperp_t @ split.w, tol, split.rank_resid_w) @ split.pperp_t
    wp = split.w_pinv
    q = split.w.shape[1]
    proj_wt = wp @ split.w
    if split.jc:
        wt = wp @ split.t
        perp = np.eye(q) - wt @ pinv(wt, tol, len(split.jc))
    else:
        perp = np.eye(q)
    rhs = proj_wt @ perp @ wp
    dev = float(np.max(np.abs(lhs - rhs)))
    return dev < threshold, dev


def ate_estimate(x: ArrayLike, z: ArrayLike, y: ArrayLike, tol: Tolerance | None = None) -> float:
    """Treatment coefficient with covariates in the regularized block.

    Builds ``[z X]`` and returns the ``J^c = {treatment}`` block of the
    partially regularized fit.
    """
    xd = as_design(x, tol)
    zv = as_vector(z, xd.n, "treatment")
    yv = as_vector(y, xd.n, "response")
    if np.ptp(zv) == 0:
        raise ConstantTreatment("treatment indicator is constant", assumption="non-constant treatment")
    xd.require(Regime.A1, Regime.B1, what="ate_estimate")
    stacked = Design(np.column_stack([zv, xd.x]), xd.tol)
    if xd.regime is Regime.A1:
        resid = zv - xd.x @ (xd.pinv @ zv)
    else:
        resid = xd.pinv @ zv
    if np.linalg.norm(resid) <= xd.tol.div_tol * max(1.0, float(np.linalg.norm(zv))):
        raise ConstantTreatment(
            "treatment is not identifiable from the covariates", assumption="non-constant treatment"
        )
    split = ColSplit.from_indices(stacked, range(1, stacked.p))
    out = partial_regularized(stacked, yv, split)
    assert out.beta_jc is not None
    return float(out.beta_jc[0])


@dataclass(frozen=True)
class PartialVariance:
    sigma2_j: float
    sigma2_jc: float | None


def partial_variance_estimators(
    design: Design | ArrayLike, y: ArrayLike, split: ColSplit | Iterable[int]
) -> PartialVariance:
    """Noise-variance estimators that withhold a column block.

    ``sigma2_j`` needs B1 and ``sigma2_jc`` needs B2; the latter is ``None``
    when only B1 holds.
    """
    d = as_design(design)
    yv = as_vector(y, d.n, "response")
    s = _split_for(d, split)
    d.require(Regime.B1, what="partial variance estimators")
    tol = d.tol
    fitj = partial_regularized(d, yv, s)

    rw = s.pperp_t @ s.w
    rw_svd = compact_svd(rw, tol, s.rank_resid_w)
    den_j = float(d.n - rw_svd.rank)
    if den_j <= tol.div_tol:
        raise ZeroDegreesOfFreedom("no residual degrees of freedom for the J block")
    r = yv - rw @ fitj.beta_j
    sigma2_j = float(r @ r) / den_j

    if not s.b2_satisfied or not s.jc:
        return PartialVariance(sigma2_j, None)
    wp = s.w_pinv
    wt = wp @ s.t
    q = s.w.shape[1]
    perp = np.eye(q) - wt @ pinv(wt, tol, len(s.jc))
    wtw_pinv = wp @ wp.T
    den_jc = float(np.trace(perp @ wtw_pinv))
    if den_jc <= tol.div_tol:
        raise ZeroDegreesOfFreedom("no residual degrees of freedom for the J^c block")
    assert fitj.beta_jc is not None
    rc = wp @ yv - wt @ fitj.beta_jc
    return PartialVariance(sigma2_j, float(rc @ rc) / den_jc)
