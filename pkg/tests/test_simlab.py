import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from olsinterp.errors import InvalidInput
from olsinterp.inference import sigma2_hat_expectation
from olsinterp.simlab import (
    CovariateModel,
    ModelKind,
    NoiseKind,
    SimConfig,
    gen_covariates,
    rng_stream,
    run_bias_sim,
    run_coverage_sim,
    simulation_sweep,
)

SPIKED = CovariateModel(ModelKind.SPIKED)
GEOMETRIC = CovariateModel(ModelKind.GEOMETRIC)


# Generators -------------------------------------------------------------------


def test_spiked_without_spikes_has_orthonormal_rows():
    x = gen_covariates(CovariateModel(ModelKind.SPIKED, k=0), 30, 80, np.random.default_rng(1))
    np.testing.assert_allclose(x @ x.T, np.eye(30), atol=1e-9)


def test_spiked_covariance_structure():
    # X = U Sigma^{1/2}: X X^T = U Sigma U^T has eigenvalues within the spectrum of Sigma
    m = CovariateModel(ModelKind.SPIKED, k=3, sigma_x2=2.0)
    x = gen_covariates(m, 20, 60, np.random.default_rng(2))
    ev = np.linalg.eigvalsh(x @ x.T)
    assert ev.min() >= 2.0 - 1e-9
    assert ev.max() <= 2.0 * (1 + 3 * 20.0) + 1e-9
    assert np.sum(ev > 2.0 + 1e-6) <= 3


def test_geometric_singular_values():
    x = gen_covariates(CovariateModel(ModelKind.GEOMETRIC, lam=1.0, rho=0.95), 25, 200, np.random.default_rng(3))
    s = np.linalg.svd(x, compute_uv=False)
    d = np.sqrt(0.95 ** np.arange(1, 201))
    # compressing diag(d) by orthonormal rows interlaces its entries
    assert np.all(s <= d[:25] + 1e-12)
    assert np.all(s >= d[-25:] - 1e-12)
    assert s.max() <= math.sqrt(0.95) + 1e-12


def test_standard_normal_moments():
    x = gen_covariates(CovariateModel(), 100, 200, np.random.default_rng(4))
    assert abs(x.mean()) < 3 / math.sqrt(x.size)
    assert abs(x.var() - 1.0) < 0.1


def test_generator_validation():
    with pytest.raises(InvalidInput):
        gen_covariates(SPIKED, 10, 5, np.random.default_rng(0))
    with pytest.raises(InvalidInput):
        CovariateModel(ModelKind.GEOMETRIC, rho=1.0)
    with pytest.raises(InvalidInput):
        CovariateModel(sigma_x2=0.0)
    with pytest.raises(InvalidInput):
        SimConfig(trials=0)
    with pytest.raises(InvalidInput):
        simulation_sweep("IV")


def test_sweeps():
    assert [n for n, _, _ in simulation_sweep("I")] == [25, 50, 75, 100, 125, 150, 175]
    assert simulation_sweep("II")[-1] == (800, 1000, 1.0)
    assert [s for _, _, s in simulation_sweep("III")] == [float(i) for i in range(1, 11)]


# Streams ----------------------------------------------------------------------


@given(st.integers(0, 2**63 - 1), st.integers(0, 1000), st.integers(0, 1000))
def test_streams_reproducible(seed, trial, rep):
    a = rng_stream(seed, trial, rep).random(100)
    b = rng_stream(seed, trial, rep).random(100)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, rng_stream(seed, trial, rep + 1).random(100))
    assert not np.array_equal(a, rng_stream(seed, trial + 1, rep).random(100))
    assert not np.array_equal(a, rng_stream(seed, trial, rep, 1).random(100))


def test_stream_rejects_negative():
    with pytest.raises(InvalidInput):
        rng_stream(-1, 0, 0)


# Runners ----------------------------------------------------------------------


def test_bias_report_aggregates():
    cfg = SimConfig(CovariateModel(), n=30, p=60, trials=6, reps=8, seed=5)
    pt = run_bias_sim(cfg).points[0]
    assert pt.estimate.shape == (6, 8)
    tb = (pt.estimate - 1.0).mean(axis=1)
    assert pt.mean_bias == pytest.approx(tb.mean())
    assert pt.se == pytest.approx(tb.std(ddof=1) / math.sqrt(6))
    np.testing.assert_allclose(pt.trial_var, pt.estimate.var(axis=1, ddof=1))
    rows = list(run_bias_sim(cfg).rows())
    assert len(rows) == 48 and rows[0][:2] == (0, 0)


def test_bias_near_zero_for_structured_models():
    for model in (SPIKED, GEOMETRIC):
        pt = run_bias_sim(SimConfig(model, n=50, p=200, trials=10, reps=20, seed=3)).points[0]
        assert abs(pt.mean_bias) < 0.2


def test_vanishing_noise_leaves_only_the_bias_term():
    cfg = SimConfig(CovariateModel(), n=20, p=40, sigma=1e-6, trials=1, reps=3, seed=9)
    pt = run_bias_sim(cfg).points[0]
    from olsinterp.simlab import _draw_design

    d, _ = _draw_design(cfg, 0)
    want = sigma2_hat_expectation(d, cfg.beta, 0.0)
    assert want >= 0
    np.testing.assert_allclose(pt.estimate[0], want, rtol=1e-4)


def test_oracle_coverage_is_exact_in_classical_regime():
    # beta* = beta under full column rank, so the oracle z-interval is an exact pivot
    cfg = SimConfig(CovariateModel(), n=60, p=10, trials=20, reps=100, seed=2)
    pt = run_coverage_sim(cfg, alpha=0.1, oracle_variance=True).points[0]
    se = math.sqrt(0.9 * 0.1 / pt.covered.size)
    assert abs(pt.coverage - 0.9) < 3 * se


def test_uniform_noise_runs():
    cfg = SimConfig(CovariateModel(), n=10, p=20, trials=2, reps=3, seed=1, noise=NoiseKind.UNIFORM01)
    pt = run_coverage_sim(cfg).points[0]
    assert 0.0 <= pt.coverage <= 1.0 and pt.mean_length > 0


def test_worker_count_does_not_change_results():
    cfg = SimConfig(SPIKED, n=25, p=60, trials=4, reps=5, seed=17)
    one = run_coverage_sim(cfg, workers=1)
    two = run_coverage_sim(cfg, workers=2)
    np.testing.assert_array_equal(one.points[0].estimate, two.points[0].estimate)
    np.testing.assert_array_equal(one.points[0].length, two.points[0].length)
    assert json.dumps(one.to_json_dict()) == json.dumps(two.to_json_dict())
    s1 = run_bias_sim(cfg, sweep=[(20, 60, 1.0), (40, 60, 2.0)], workers=1)
    s2 = run_bias_sim(cfg, sweep=[(20, 60, 1.0), (40, 60, 2.0)], workers=3)
    assert list(s1.rows()) == list(s2.rows())


def test_report_json_is_serializable():
    rep = run_coverage_sim(SimConfig(CovariateModel(), n=10, p=20, trials=2, reps=2, seed=0))
    d = json.loads(json.dumps(rep.to_json_dict()))
    assert d["points"][0]["n"] == 10 and d["config"]["model"]["kind"] == "normal"
    assert d["alpha"] == 0.1
