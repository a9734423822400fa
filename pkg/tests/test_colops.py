import numpy as np
import pytest
from conftest import random_a1, random_b2, refit
from hypothesis import given
from hypothesis import strategies as st

from olsinterp import (
    ColSplit,
    ate_estimate,
    cochran,
    fit,
    fwl_matrix_identity_check,
    omitted_variable_bias,
    partial_regularized,
    partial_variance_estimators,
)
from olsinterp.colops import predictive_cochran_gap
from olsinterp.errors import AssumptionViolated, ConstantTreatment, InvalidInput, RegimeMismatch

seeds = st.integers(0, 2**32 - 1)


def kkt_solve(x, y, j):
    """Dense solve of the optimality system for min ||beta_J|| subject to X beta = y."""
    n, p = x.shape
    order = list(j) + [c for c in range(p) if c not in set(j)]
    xo = x[:, order]
    q = np.zeros((p, p))
    q[: len(j), : len(j)] = np.eye(len(j))
    m = np.block([[q, xo.T], [xo, np.zeros((n, n))]])
    sol = np.linalg.solve(m, np.concatenate([np.zeros(p), y]))
    return sol[: len(j)], sol[len(j) : p]


def b2_instance(seed, n=5, p=9, q=7):
    rng = np.random.default_rng(seed)
    x, j = random_b2(rng, n, p, q)
    return x, rng.standard_normal(n), j


# Split ------------------------------------------------------------------------


def test_split_construction(rng):
    x, j = random_b2(rng)
    s = ColSplit.from_indices(x, j)
    assert s.jc == (7, 8) and s.b2_satisfied
    assert s.w.shape == (5, 7) and s.t.shape == (5, 2)
    with pytest.raises(InvalidInput):
        ColSplit.from_indices(x, [])
    with pytest.raises(InvalidInput):
        ColSplit.from_indices(x, [0, 9])
    assert not ColSplit.from_indices(x, [0, 1]).b2_satisfied


# Cochran ----------------------------------------------------------------------


def test_cochran_three_solve_oracle(rng):
    x, j = random_b2(rng)
    y = rng.standard_normal(5)
    rep = cochran(x, y, j)
    alpha = refit(x[:, j], y)
    beta = refit(x, y)
    delta = np.column_stack([refit(x[:, j], x[:, c]) for c in (7, 8)])
    np.testing.assert_allclose(alpha, beta[:7] + delta @ beta[7:], atol=1e-8)
    np.testing.assert_allclose(rep.triple.alpha_hat, alpha, atol=1e-10)
    np.testing.assert_allclose(rep.triple.delta_hat, delta, atol=1e-10)
    assert rep.holds and rep.setting == "high-dimensional"


def test_cochran_response_from_j_alone(rng):
    x = random_a1(rng)
    y = x[:, :3] @ [1.0, -2.0, 0.5]
    rep = cochran(x, y, [0, 1, 2])
    np.testing.assert_allclose(rep.bias_term, 0, atol=1e-10)
    assert rep.setting == "classical" and rep.holds


def test_cochran_orthogonal_omitted_block(rng):
    # Delta = W^dagger T vanishes, so the short and long fits agree on J
    x = random_a1(rng)
    q, _ = np.linalg.qr(x)
    x = q * [3.0, 2.0, 1.0, 1.5, 0.5]
    rep = cochran(x, rng.standard_normal(12), [0, 1, 2])
    np.testing.assert_allclose(rep.triple.delta_hat, 0, atol=1e-12)
    np.testing.assert_allclose(rep.triple.alpha_hat, rep.direct_term, atol=1e-12)


def test_cochran_rejects_degenerate(rng):
    x, j = random_b2(rng)
    with pytest.raises(AssumptionViolated) as info:
        cochran(x, np.ones(5), [0, 1])
    assert "B2" in info.value.assumption


@given(seeds)
def test_cochran_identity_b2(seed):
    x, y, j = b2_instance(seed)
    rep = cochran(x, y, j)
    assert rep.deviation < 1e-8 * max(1.0, np.linalg.norm(rep.triple.alpha_hat))
    assert rep.predictive_deviation < 1e-8


@given(seeds)
def test_cochran_identity_a1(seed):
    rng = np.random.default_rng(seed)
    x, y = random_a1(rng), rng.standard_normal(12)
    rep = cochran(x, y, [0, 2, 4])
    assert rep.holds and rep.deviation < 1e-8


@given(seeds)
def test_predictive_cochran_non_min_norm(seed):
    x, y, j = b2_instance(seed)
    rng = np.random.default_rng(seed + 7)
    rep = cochran(x, y, j)
    w = x[:, j]
    null_x = np.linalg.svd(x)[2][5:].T
    null_w = np.linalg.svd(w)[2][5:].T
    for _ in range(20):
        alpha = rep.triple.alpha_hat + null_w @ rng.standard_normal(null_w.shape[1])
        beta = rep.triple.beta_hat + null_x @ rng.standard_normal(null_x.shape[1])
        delta = rep.triple.delta_hat + null_w @ rng.standard_normal((null_w.shape[1], 2))
        gap = predictive_cochran_gap(w, alpha, beta[j], beta[7:], delta)
        assert gap < 1e-8 * max(1.0, np.abs(alpha).max(), np.abs(beta).max(), np.abs(delta).max())


def test_ovb_examples(rng):
    x, j = random_b2(rng)
    y = rng.standard_normal(5)
    rep = omitted_variable_bias(x, y, j, [7, 8])
    np.testing.assert_allclose(rep.bias, refit(x[:, j], y) - refit(x, y)[:7], atol=1e-8)
    with pytest.raises(InvalidInput):
        omitted_variable_bias(x, y, [0, 1], [1, 2])


def test_ovb_collinear_confounder(rng):
    x = random_a1(rng, 12, 4)
    x = np.column_stack([x, 2.0 * x[:, 0]])
    with pytest.raises(AssumptionViolated):
        omitted_variable_bias(x, rng.standard_normal(12), [0, 1, 2, 3], [4])


# Partial regularization --------------------------------------------------------


def test_partial_full_j_is_min_norm(rng):
    x, _ = random_b2(rng)
    y = rng.standard_normal(5)
    r = partial_regularized(x, y, range(9))
    np.testing.assert_allclose(r.beta_j, fit(x, y).beta_hat, atol=1e-10)
    assert r.beta_jc.size == 0


@given(seeds, st.integers(1, 4))
def test_partial_a1_is_ols_for_every_j(seed, q):
    rng = np.random.default_rng(seed)
    x, y = random_a1(rng), rng.standard_normal(12)
    j = sorted(rng.choice(5, size=q, replace=False).tolist())
    s = ColSplit.from_indices(x, j)
    r = partial_regularized(x, y, s)
    np.testing.assert_allclose(r.assemble(s), refit(x, y), atol=1e-8)
    swapped = partial_regularized(x, y, s.jc)
    np.testing.assert_allclose(swapped.beta_j, r.beta_jc, atol=1e-9)
    np.testing.assert_allclose(swapped.beta_jc, r.beta_j, atol=1e-9)


@given(seeds)
def test_partial_matches_kkt(seed):
    x, y, j = b2_instance(seed)
    r = partial_regularized(x, y, j)
    bj, bjc = kkt_solve(x, y, j)
    np.testing.assert_allclose(r.beta_j, bj, atol=1e-7)
    np.testing.assert_allclose(r.beta_jc, bjc, atol=1e-7)
    s = ColSplit.from_indices(x, j)
    assert np.abs(x @ r.assemble(s) - y).max() < 1e-8 * max(1.0, np.linalg.norm(y))
    # residualizing y is optional under B1; the oracle cutoff sits above the
    # roundoff floor of the projected product
    np.testing.assert_allclose(r.beta_j, np.linalg.pinv(s.pperp_t @ s.w, rcond=1e-10) @ y, atol=1e-8)


def test_partial_b1_without_b2(rng):
    x = rng.standard_normal((5, 9))
    r = partial_regularized(x, rng.standard_normal(5), [0, 1, 2])
    assert r.beta_jc is None and not r.beta_jc_available
    with pytest.raises(AssumptionViolated):
        r.assemble(ColSplit.from_indices(x, [0, 1, 2]))


def test_partial_rejects_degenerate():
    with pytest.raises(AssumptionViolated):
        partial_regularized(np.ones((4, 3)), np.arange(4.0), [0])


@given(seeds)
def test_matrix_identity(seed):
    rng = np.random.default_rng(seed)
    x, j = random_b2(rng, 4, 7, 5)
    ok, dev = fwl_matrix_identity_check(ColSplit.from_indices(x, j))
    assert ok and dev < 1e-8


def test_matrix_identity_edge_cases(rng):
    x = rng.standard_normal((4, 7))
    s = ColSplit.from_indices(x, range(7))
    ok, dev = fwl_matrix_identity_check(s)
    assert ok and dev < 1e-12
    x[:, 6] = x[:, 5]
    with pytest.raises(AssumptionViolated):
        fwl_matrix_identity_check(ColSplit.from_indices(x, range(5)))


# Treatment effect -------------------------------------------------------------


def test_ate_noiseless(rng):
    x = rng.standard_normal((10, 20))
    z = rng.integers(0, 2, 10).astype(float)
    z[:2] = [0.0, 1.0]
    assert ate_estimate(x, z, 2.5 * z) == pytest.approx(2.5, abs=1e-9)
    xa = rng.standard_normal((30, 3))
    za = rng.integers(0, 2, 30).astype(float)
    za[:2] = [0.0, 1.0]
    assert ate_estimate(xa, za, -1.5 * za) == pytest.approx(-1.5, abs=1e-9)


@given(seeds, st.booleans())
def test_ate_matches_stacked_partial(seed, wide):
    rng = np.random.default_rng(seed)
    n, p = (8, 15) if wide else (20, 4)
    x = rng.standard_normal((n, p))
    z = np.r_[0.0, 1.0, rng.integers(0, 2, n - 2)]
    y = rng.standard_normal(n)
    stacked = np.column_stack([z, x])
    r = partial_regularized(stacked, y, range(1, p + 1))
    assert ate_estimate(x, z, y) == pytest.approx(float(r.beta_jc[0]), abs=1e-9)
    if wide:
        xp = np.linalg.pinv(x)
        want = float((np.linalg.pinv((xp @ z)[:, None]) @ (xp @ y))[0])
    else:
        pp = np.eye(n) - x @ np.linalg.pinv(x)
        want = float((np.linalg.pinv((pp @ z)[:, None]) @ (pp @ y))[0])
    assert ate_estimate(x, z, y) == pytest.approx(want, abs=1e-8)


def test_ate_errors(rng):
    with pytest.raises(ConstantTreatment):
        ate_estimate(rng.standard_normal((5, 8)), np.ones(5), rng.standard_normal(5))
    with pytest.raises(ConstantTreatment):
        ate_estimate(rng.standard_normal((5, 8)), np.zeros(5), rng.standard_normal(5))
    with pytest.raises(RegimeMismatch):
        ate_estimate(np.ones((6, 3)), np.r_[0.0, 1.0, 0, 1, 0, 1], np.ones(6))


# Partial variances ---------------------------------------------------------------


def test_partial_variance_zero_residual(rng):
    x, j = random_b2(rng)
    s = ColSplit.from_indices(x, j)
    y = s.pperp_t @ s.w @ rng.standard_normal(7)
    assert partial_variance_estimators(x, y, s).sigma2_j == pytest.approx(0.0, abs=1e-20)


@given(seeds)
def test_partial_variance_numerators(seed):
    x, y, j = b2_instance(seed)
    s = ColSplit.from_indices(x, j)
    r = partial_regularized(x, y, s)
    pv = partial_variance_estimators(x, y, s)
    pt = np.eye(5) - x[:, 7:] @ np.linalg.pinv(x[:, 7:])
    rw = pt @ x[:, j]
    num_j = np.sum((y - rw @ r.beta_j) ** 2)
    # n - rank(P_T^perp W) = |J^c| under B2
    assert pv.sigma2_j * 2 == pytest.approx(num_j, rel=1e-9, abs=1e-12)
    wp = np.linalg.pinv(x[:, j])
    wt = wp @ x[:, 7:]
    num_jc = np.sum((wp @ y - wt @ r.beta_jc) ** 2)
    den_jc = np.trace((np.eye(7) - wt @ np.linalg.pinv(wt)) @ wp @ wp.T)
    assert pv.sigma2_jc * den_jc == pytest.approx(num_jc, rel=1e-9, abs=1e-12)


def test_partial_variance_monte_carlo(rng):
    x, j = random_b2(rng, 10, 16, 13)
    s = ColSplit.from_indices(x, j)
    mean = s.pperp_t @ s.w @ rng.standard_normal(13)
    draws = np.array(
        [partial_variance_estimators(x, mean + 1.5 * rng.standard_normal(10), s).sigma2_j for _ in range(4000)]
    )
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - 2.25) < 3 * se


def test_partial_variance_requires_b1(rng):
    with pytest.raises(RegimeMismatch):
        partial_variance_estimators(random_a1(rng), rng.standard_normal(12), [0, 1])
    x = rng.standard_normal((5, 9))
    pv = partial_variance_estimators(x, rng.standard_normal(5), [0, 1, 2])
    assert pv.sigma2_jc is None
