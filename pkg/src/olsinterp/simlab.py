"""Monte Carlo laboratory for the variance-estimator bias and coverage studies.

Randomness is keyed by ``(seed, trial, rep)`` through ``numpy``'s
``SeedSequence`` spawn keys.  Each trial is computed in isolation and results
are merged in index order, so the worker count never changes the output.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import InvalidInput, NumericalFailure
from .estimator import Design, Regime
from .inference import _loo_operator, z_quantile
from .linalg import Array

__all__ = [
    "ModelKind",
    "CovariateModel",
    "NoiseKind",
    "SimConfig",
    "SimPoint",
    "SimReport",
    "rng_stream",
    "gen_covariates",
    "run_bias_sim",
    "run_coverage_sim",
    "simulation_sweep",
]

log = logging.getLogger(__name__)

MAX_REDRAWS = 10
# Stream purposes, appended to the spawn key so design and replication draws
# never share a stream.
_PURPOSE_REP = 0
_PURPOSE_DESIGN = 1


class ModelKind(str, Enum):
    STANDARD_NORMAL = "normal"
    SPIKED = "spiked"
    GEOMETRIC = "geometric"


class NoiseKind(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM01 = "uniform"


@dataclass(frozen=True)
class CovariateModel:
    """Covariate distribution.

    ``sigma_x2``, ``k`` and ``spike_range`` apply to the spiked model;
    ``lam`` and ``rho`` to the geometric model.
    """

    kind: ModelKind = ModelKind.STANDARD_NORMAL
    sigma_x2: float = 1.0
    k: int = 10
    spike_range: tuple[float, float] = (10.0, 20.0)
    lam: float = 1.0
    rho: float = 0.95

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if not 0 < self.rho < 1:
            raise InvalidInput(f"rho must lie in (0, 1), got {self.rho}")
        if not self.sigma_x2 > 0:
            raise InvalidInput("sigma_x2 must be positive")
        if not self.lam > 0:
            raise InvalidInput("lambda must be positive")
        if self.k < 0:
            raise InvalidInput("spike count k must be nonnegative")
        lo, hi = self.spike_range
        if not 0 <= lo <= hi:
            raise InvalidInput("spike_range must satisfy 0 <= low <= high")


@dataclass(frozen=True)
class SimConfig:
    model: CovariateModel = field(default_factory=CovariateModel)
    n: int = 100
    p: int = 200
    sigma: float = 1.0
    trials: int = 100
    reps: int = 100
    seed: int = 0
    noise: NoiseKind = NoiseKind.GAUSSIAN

    def __post_init__(self) -> None:
        object.__setattr__(self, "noise", NoiseKind(self.noise))
        if self.trials < 1 or self.reps < 1:
            raise InvalidInput("trials and reps must be at least 1")
        if self.n < 1 or self.p < 1:
            raise InvalidInput("n and p must be positive")
        if not self.sigma > 0:
            raise InvalidInput("sigma must be positive")

    @property
    def beta(self) -> Array:
        return np.full(self.p, 1.0 / math.sqrt(self.p))

    def at(self, n: int, p: int, sigma: float) -> "SimConfig":
        return SimConfig(self.model, n, p, sigma, self.trials, self.reps, self.seed, self.noise)

    def echo(self) -> dict[str, Any]:
        out = asdict(self)
        out["model"]["kind"] = self.model.kind.value
        out["model"]["spike_range"] = list(self.model.spike_range)
        out["noise"] = self.noise.value
        return out


def rng_stream(seed: int, trial: int, rep: int, purpose: int = _PURPOSE_REP) -> np.random.Generator:
    """Independent generator for one ``(seed, trial, rep)`` cell."""
    if seed < 0 or trial < 0 or rep < 0:
        raise InvalidInput("seed, trial and rep must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial), int(rep), int(purpose)))
    return np.random.Generator(np.random.PCG64(ss))


def _orthonormal_rows(rng: np.random.Generator, n: int, p: int) -> Array:
    """``n x p`` matrix with orthonormal rows, Haar distributed (sign-fixed QR)."""
    g = rng.standard_normal((p, n))
    q, r = np.linalg.qr(g)
    q *= np.sign(np.diag(r))
    return q.T


def _spiked_sqrt(rng: np.random.Generator, model: CovariateModel, p: int) -> Array:
    """Symmetric square root of ``sigma_x2 (I + sum_l lam_l v_l v_l^T)``.

    The spikes span at most ``k`` dimensions, so the root is assembled from a
    ``k x k`` eigenproblem instead of a ``p x p`` one.
    """
    k = model.k
    scale = math.sqrt(model.sigma_x2)
    if k == 0:
        return scale * np.eye(p)
    vs = rng.standard_normal((p, k))
    vs /= np.linalg.norm(vs, axis=0)
    lams = rng.uniform(*model.spike_range, size=k)
    q, _ = np.linalg.qr(vs)
    c = q.T @ vs
    w, e = np.linalg.eigh(np.eye(q.shape[1]) + (c * lams) @ c.T)
    basis = q @ e
    return scale * (np.eye(p) + (basis * (np.sqrt(np.clip(w, 0, None)) - 1.0)) @ basis.T)


def gen_covariates(model: CovariateModel, n: int, p: int, rng: np.random.Generator) -> Array:
    """Draw an ``n x p`` design from ``model``."""
    kind = model.kind
    if kind is ModelKind.STANDARD_NORMAL:
        return rng.standard_normal((n, p))
    if n > p:
        raise InvalidInput(f"{kind.value} model needs n <= p (orthonormal rows), got n={n}, p={p}")
    if kind is ModelKind.SPIKED:
        u = _orthonormal_rows(rng, n, p)
        return u @ _spiked_sqrt(rng, model, p)
    u = _orthonormal_rows(rng, n, p)
    v = _orthonormal_rows(rng, p, p).T
    d = model.lam * np.sqrt(model.rho ** np.arange(1, p + 1))
    return (u * d) @ v.T


def _noise(rng: np.random.Generator, kind: NoiseKind, n: int) -> Array:
    if kind is NoiseKind.GAUSSIAN:
        return rng.standard_normal(n)
    return rng.uniform(0.0, 1.0, n)


def _draw_design(cfg: SimConfig, trial: int) -> tuple[Design, int]:
    rng = rng_stream(cfg.seed, trial, 0, _PURPOSE_DESIGN)
    for redraws in range(MAX_REDRAWS + 1):
        d = Design(gen_covariates(cfg.model, cfg.n, cfg.p, rng))
        if d.regime is not Regime.DEGENERATE:
            return d, redraws
        log.info("trial %d: degenerate design redrawn", trial)
    raise NumericalFailure(f"trial {trial}: {MAX_REDRAWS} consecutive degenerate designs")


@dataclass(frozen=True, eq=False)
class SimPoint:
    """Per-(trial, rep) records and aggregates for one ``(n, p, sigma)`` point."""

    kind: str  # "bias" or "coverage"
    config: SimConfig
    estimate: Array  # (trials, reps) sigma2_hat
    covered: Array | None  # (trials, reps) bool
    length: Array | None  # (trials, reps)
    redraws: Array  # (trials,)

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def p(self) -> int:
        return self.config.p

    @property
    def sigma(self) -> float:
        return self.config.sigma

    @property
    def bias(self) -> Array:
        return self.estimate - self.config.sigma**2

    @property
    def trial_bias(self) -> Array:
        return self.bias.mean(axis=1)

    @property
    def mean_bias(self) -> float:
        return float(self.trial_bias.mean())

    @property
    def se(self) -> float:
        t = self.trial_bias
        if t.size < 2:
            return float("nan")
        return float(t.std(ddof=1) / math.sqrt(t.size))

    @property
    def trial_var(self) -> Array:
        """Within-trial variance of the estimator across replications."""
        if self.estimate.shape[1] < 2:
            return np.zeros(self.estimate.shape[0])
        return self.estimate.var(axis=1, ddof=1)

    @property
    def coverage(self) -> float | None:
        return None if self.covered is None else float(self.covered.mean())

    @property
    def mean_length(self) -> float | None:
        return None if self.length is None else float(self.length.mean())

    def summary(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "n": self.n,
            "p": self.p,
            "sigma": self.sigma,
            "mean": self.mean_bias,
            "se": self.se,
            "mean_estimate": float(self.estimate.mean()),
            "mean_trial_var": float(self.trial_var.mean()),
            "redraws": int(self.redraws.sum()),
        }
        if self.covered is not None:
            out["coverage"] = self.coverage
            out["mean_length"] = self.mean_length
        return out

    def rows(self) -> Iterable[tuple[Any, ...]]:
        trials, reps = self.estimate.shape
        bias = self.bias
        for t in range(trials):
            for r in range(reps):
                cov = "" if self.covered is None else int(self.covered[t, r])
                ln = "" if self.length is None else float(self.length[t, r])
                yield (t, r, self.n, self.p, self.sigma, float(self.estimate[t, r]), float(bias[t, r]), cov, ln)


@dataclass(frozen=True, eq=False)
class SimReport:
    kind: str
    config: SimConfig
    points: tuple[SimPoint, ...]
    alpha: float | None = None

    CSV_COLUMNS = ("trial", "rep", "n", "p", "sigma", "estimate", "bias", "covered", "length")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "seed": self.config.seed,
            "alpha": self.alpha,
            "config": self.config.echo(),
            "seed_provenance": "numpy SeedSequence(entropy=seed, spawn_key=(trial, rep, purpose)); "
            "purpose 1 draws the trial design, purpose 0 the replication",
            "points": [pt.summary() for pt in self.points],
        }

    def rows(self) -> Iterable[tuple[Any, ...]]:
        for pt in self.points:
            yield from pt.rows()


# Workers --------------------------------------------------------------------


def _bias_trial(args: tuple[SimConfig, int]) -> tuple[Array, int]:
    cfg, trial = args
    d, redraws = _draw_design(cfg, trial)
    op, den = _loo_operator(d)
    signal = d.x @ cfg.beta
    est = np.empty(cfg.reps)
    for r in range(cfg.reps):
        rng = rng_stream(cfg.seed, trial, r)
        y = signal + cfg.sigma * _noise(rng, cfg.noise, cfg.n)
        e = op @ y
        est[r] = float(e @ e) / den
    return est, redraws


def _coverage_trial(args: tuple[SimConfig, int, float, bool]) -> tuple[Array, Array, Array, int]:
    cfg, trial, alpha, oracle = args
    d, redraws = _draw_design(cfg, trial)
    op, den = _loo_operator(d)
    beta = cfg.beta
    signal = d.x @ beta
    z = z_quantile(alpha)
    v, s, xp = d.svd.v, d.svd.s, d.pinv
    est = np.empty(cfg.reps)
    covered = np.empty(cfg.reps, dtype=bool)
    length = np.empty(cfg.reps)
    for r in range(cfg.reps):
        rng = rng_stream(cfg.seed, trial, r)
        y = signal + cfg.sigma * _noise(rng, cfg.noise, cfg.n)
        # The test covariate is a fresh, independent draw from the model.
        x_new = gen_covariates(cfg.model, 1, cfg.p, rng)[0]
        e = op @ y
        s2 = float(e @ e) / den
        est[r] = s2
        proj = (v.T @ x_new) / s
        var = (cfg.sigma**2 if oracle else s2) * float(proj @ proj)
        half = z * math.sqrt(var)
        yhat = float(x_new @ (xp @ y))
        target = float(x_new @ beta)
        covered[r] = abs(target - yhat) <= half
        length[r] = 2.0 * half
    return est, covered, length, redraws


def _map(fn, tasks: Sequence[Any], workers: int) -> list[Any]:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def run_bias_sim(
    config: SimConfig,
    sweep: Iterable[tuple[int, int, float]] | None = None,
    workers: int = 1,
) -> SimReport:
    """Bias of ``sigma2_hat`` at each ``(n, p, sigma)`` point of ``sweep``."""
    pts = list(sweep) if sweep is not None else [(config.n, config.p, config.sigma)]
    out = []
    for n, p, sigma in pts:
        cfg = config.at(int(n), int(p), float(sigma))
        res = _map(_bias_trial, [(cfg, t) for t in range(cfg.trials)], workers)
        est = np.vstack([r[0] for r in res])
        redraws = np.array([r[1] for r in res])
        out.append(SimPoint("bias", cfg, est, None, None, redraws))
    return SimReport("bias", config, tuple(out))


def run_coverage_sim(
    config: SimConfig,
    alpha: float = 0.1,
    workers: int = 1,
    oracle_variance: bool = False,
    sweep: Iterable[tuple[int, int, float]] | None = None,
) -> SimReport:
    """Empirical coverage of the z-interval for ``<x_new, beta>``.

    With ``oracle_variance`` the true noise variance replaces ``sigma2_hat``.
    """
    if not 0 < alpha < 1:
        raise InvalidInput(f"alpha must lie in (0, 1), got {alpha}")
    pts = list(sweep) if sweep is not None else [(config.n, config.p, config.sigma)]
    out = []
    for n, p, sigma in pts:
        cfg = config.at(int(n), int(p), float(sigma))
        tasks = [(cfg, t, alpha, oracle_variance) for t in range(cfg.trials)]
        res = _map(_coverage_trial, tasks, workers)
        est = np.vstack([r[0] for r in res])
        cov = np.vstack([r[1] for r in res])
        length = np.vstack([r[2] for r in res])
        redraws = np.array([r[3] for r in res])
        out.append(SimPoint("coverage", cfg, est, cov, length, redraws))
    return SimReport("coverage", config, tuple(out), alpha)


def simulation_sweep(which: str, p: int = 200) -> list[tuple[int, int, float]]:
    """Grids of the three bias studies.

    ``"I"``: n from 25 to 175 at fixed p, ``"II"``: n/p = 0.8 with p from 200 to
    1000, ``"III"``: n = 160, p = 200 with sigma from 1 to 10.
    """
    if which == "I":
        return [(n, p, 1.0) for n in range(25, 176, 25)]
    if which == "II":
        return [(int(0.8 * q), q, 1.0) for q in range(200, 1001, 200)]
    if which == "III":
        return [(160, 200, float(s)) for s in range(1, 11)]
    raise InvalidInput(f"unknown simulation {which!r}; expected I, II or III")
