from __future__ import annotations

import math

import numpy as np
import pytest

from simdoe.errors import (DegenerateDesign, InvalidCorrelation,
                           ValidationError)
from simdoe.heredity import ActivityPattern, sample_pattern, solve_heredity_params
from simdoe.seeds import derive_seed
from simdoe.slstudy import (Dataset, LinearPredictor, PopulationSpec,
                            baseline_ridge, coefficient_vector,
                            covariance_matrix, evaluate, generate_dataset,
                            kkt_violation, lambda_grid, lasso_cv, lasso_path,
                            logit_r2, r_squared, ridge_cv, ridge_solve,
                            sl_logit_r2)


def _pattern(q, mains, pairs=()):
    return ActivityPattern(q, frozenset(mains), frozenset(pairs))


def _dataset(rng, n=80, q=6, pattern=None, beta_mu=2.0, sigma=1.0, x_cor=0.0):
    spec = PopulationSpec(q=q, n=n, ene=4, beta_mu=beta_mu, sigma=sigma,
                          x_cor=x_cor)
    pattern = pattern or _pattern(q, {0, 2}, {(0, 1)})
    return generate_dataset(spec, pattern, int(rng.integers(2 ** 32)))


def test_covariance_matrix_decay():
    m = covariance_matrix(3, 0.8)
    np.testing.assert_allclose(m, [[1, .8, .64], [.8, 1, .8], [.64, .8, 1]],
                               rtol=1e-12)


def test_covariance_matrix_identity_limit():
    np.testing.assert_array_equal(covariance_matrix(4, 0.0), np.eye(4))


def test_covariance_matrix_positive_definite():
    for q, x_cor in [(5, 0.8), (50, 0.95), (200, 0.8)]:
        eig = np.linalg.eigvalsh(covariance_matrix(q, x_cor))
        assert eig.min() > 0


def test_covariance_matrix_rejects_bad_correlation():
    with pytest.raises(InvalidCorrelation):
        covariance_matrix(3, 1.0)
    with pytest.raises(InvalidCorrelation):
        covariance_matrix(3, -0.2)


def test_generate_dataset_shapes_and_determinism():
    spec = PopulationSpec(q=5, n=40, ene=4, beta_mu=2.0, sigma=1.0, x_cor=0.5)
    pattern = _pattern(5, {1}, {(1, 3)})
    a = generate_dataset(spec, pattern, 42)
    b = generate_dataset(spec, pattern, 42)
    assert a.X.shape == (40, 15) and a.p == 15
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    c = generate_dataset(spec, pattern, 43)
    assert not np.array_equal(a.y, c.y)


def test_generate_dataset_rejects_mismatched_pattern():
    spec = PopulationSpec(q=5, n=10, ene=4, beta_mu=1.0, sigma=1.0, x_cor=0.0)
    with pytest.raises(ValidationError):
        generate_dataset(spec, _pattern(6, {0}), 1)


def test_coefficient_vector_layout():
    beta = coefficient_vector(4, _pattern(4, {0, 3}, {(1, 3)}), 2.5)
    # linear block then pairs in (0,1),(0,2),(0,3),(1,2),(1,3),... order
    want = np.zeros(10)
    want[0] = want[3] = 2.5
    want[4 + 4] = 2.5
    np.testing.assert_array_equal(beta, want)


def test_zero_signal_population():
    spec = PopulationSpec(q=4, n=20000, ene=2, beta_mu=0.0, sigma=1.0,
                          x_cor=0.0)
    data = generate_dataset(spec, _pattern(4, {0}, ()), 7)
    cors = [abs(np.corrcoef(data.X[:, j], data.y)[0, 1])
            for j in range(data.p)]
    assert max(cors) < 0.05


def test_noiseless_truth_has_unit_r2():
    spec = PopulationSpec(q=4, n=500, ene=2, beta_mu=3.0, sigma=1e-9,
                          x_cor=0.3)
    data = generate_dataset(spec, _pattern(4, {0, 1}, {(0, 1)}), 11)
    assert r_squared(data.y, data.X @ data.beta) > 0.999999


def test_product_columns_standardized_under_independence():
    spec = PopulationSpec(q=4, n=100000, ene=2, beta_mu=1.0, sigma=1.0,
                          x_cor=0.0)
    data = generate_dataset(spec, _pattern(4, {0}), 13)
    var = data.X[:, 4:].var(axis=0)
    assert np.all(np.abs(var - 1.0) < 0.05)


def test_measured_covariance_matches_target():
    spec = PopulationSpec(q=4, n=100000, ene=2, beta_mu=1.0, sigma=1.0,
                          x_cor=0.8)
    data = generate_dataset(spec, _pattern(4, {0}), 17)
    emp = np.cov(data.X[:, :4].T)
    np.testing.assert_allclose(emp, covariance_matrix(4, 0.8), atol=0.02)


def test_lasso_exact_recovery_at_grid_bottom():
    rng = np.random.default_rng(0)
    n, q = 400, 4
    spec = PopulationSpec(q=q, n=n, ene=2, beta_mu=1.0, sigma=1.0, x_cor=0.0)
    data = generate_dataset(spec, _pattern(q, {0}), 23)
    y = 3.0 * data.X[:, 0]
    lambdas = lambda_grid(data.X, y)
    coefs = lasso_path(data.X, y, lambdas)
    assert abs(coefs[-1, 0] - 3.0) < 0.02
    assert np.all(np.abs(coefs[-1, 1:]) < 0.02)


def test_lasso_all_zero_at_lambda_max():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 8))
    y = rng.normal(size=50) + X[:, 0]
    lambdas = lambda_grid(X, y)
    coefs = lasso_path(X, y, lambdas[:1])
    assert np.all(coefs[0] == 0.0)
    # all-zero coefficients mean the prediction is the response mean
    pred = LinearPredictor("lasso", float(y.mean()), coefs[0], lambdas[0])
    np.testing.assert_allclose(pred.predict(X), y.mean())


def test_lasso_kkt_conditions_at_cv_solution():
    rng = np.random.default_rng(5)
    for seed in (3, 4):
        data = _dataset(rng, n=60, q=6, x_cor=0.6)
        fit = lasso_cv(data, folds=5, seed=seed)
        assert kkt_violation(data.X, data.y, fit.coef, fit.penalty) <= 1e-6


def test_lasso_kkt_rank_deficient():
    rng = np.random.default_rng(6)
    spec = PopulationSpec(q=12, n=40, ene=6, beta_mu=2.0, sigma=0.5, x_cor=0.8)
    pattern = sample_pattern(solve_heredity_params(6, 12), 55)
    data = generate_dataset(spec, pattern, 999)   # p = 78 > n = 40
    fit = lasso_cv(data, folds=5, seed=1)
    assert kkt_violation(data.X, data.y, fit.coef, fit.penalty) <= 1e-6


def test_lasso_support_monotone_along_path():
    rng = np.random.default_rng(9)
    data = _dataset(rng, n=120, q=5, beta_mu=3.0, sigma=0.5)
    lambdas = lambda_grid(data.X, data.y, n_values=40)
    coefs = lasso_path(data.X, data.y, lambdas)
    nnz = (coefs != 0).sum(axis=1)
    # lambda decreases along the grid, so support size must not shrink
    assert np.all(np.diff(nnz) >= 0)


def test_lasso_rejects_constant_matrix():
    X = np.ones((30, 3))
    y = np.arange(30.0)
    with pytest.raises(DegenerateDesign):
        lasso_path(X, y, np.array([0.1]))


def test_ridge_infinite_penalty_predicts_mean():
    rng = np.random.default_rng(10)
    data = _dataset(rng)
    b0, coef = ridge_solve(data.X, data.y, 1e12)
    pred = b0 + data.X @ coef
    np.testing.assert_allclose(pred, data.y.mean(), atol=1e-6)


def test_ridge_zero_penalty_matches_least_squares():
    rng = np.random.default_rng(11)
    data = _dataset(rng, n=200, q=5)   # p = 15 << n, full rank
    b0, coef = ridge_solve(data.X, data.y, 1e-12)
    xc = data.X - data.X.mean(axis=0)
    yc = data.y - data.y.mean()
    ls, *_ = np.linalg.lstsq(xc, yc, rcond=None)
    np.testing.assert_allclose(coef, ls, atol=1e-6)


def test_ridge_cv_column_restriction_pads_zeros():
    rng = np.random.default_rng(12)
    data = _dataset(rng, n=100, q=6)
    fit = baseline_ridge(data, folds=5, seed=2)
    assert fit.coef.shape == (21,)
    assert np.all(fit.coef[6:] == 0.0)
    assert np.any(fit.coef[:6] != 0.0)
    full = ridge_cv(data, folds=5, seed=2)
    assert np.any(full.coef[6:] != 0.0)


def test_lasso_beats_baseline_on_sparse_truth():
    # paired simulation: identical datasets, both learners
    wins = 0
    for s in range(10):
        spec = PopulationSpec(q=8, n=80, ene=4, beta_mu=3.0, sigma=0.5,
                              x_cor=0.0)
        pattern = sample_pattern(solve_heredity_params(4, 8),
                                 derive_seed(71, s))
        train = generate_dataset(spec, pattern, derive_seed(72, s))
        test = generate_dataset(spec, pattern, derive_seed(73, s), n_rows=800)
        la = evaluate(lasso_cv(train, folds=5, seed=s), test)
        rg = evaluate(baseline_ridge(train, folds=5, seed=s), test)
        wins += la >= rg
    assert wins >= 8


def test_evaluate_conventions():
    rng = np.random.default_rng(13)
    data = _dataset(rng, n=50)
    perfect = LinearPredictor("t", 0.0, data.beta, 0.0)
    ident = Dataset(data.X, data.X @ data.beta, data.pattern, data.beta)
    # exact predictions hit the upper clamp: logit(1 - 1e-8) = 18.42...
    assert evaluate(perfect, ident) == logit_r2(1.0)
    assert abs(evaluate(perfect, ident) - 18.42) < 0.01
    assert abs(logit_r2(0.5)) < 1e-12
    # affine rescaling of predictions leaves R^2 = 1
    affine = Dataset(data.X, 2.0 + 3.0 * (data.X @ data.beta),
                     data.pattern, data.beta)
    assert evaluate(perfect, affine) == evaluate(perfect, ident)
    # constant predictions: R^2 defined as 0, clamped into the logit
    flat = LinearPredictor("c", 1.0, np.zeros(data.p), 0.0)
    assert evaluate(flat, ident) == logit_r2(0.0)
    assert abs(evaluate(flat, ident) + 18.42) < 0.01


def test_sl_simulation_determinism():
    levels = {"n": 60, "q": 6, "ENE": 6, "beta.mu": 3.0, "sigma": 1.0,
              "x.cor": 0.0, "model": "lasso"}
    params = {"test_size": 300, "folds": 5}
    a = sl_logit_r2(levels, params, 12345)
    b = sl_logit_r2(levels, params, 12345)
    assert a == b
    c = sl_logit_r2(levels, params, 12346)
    assert a != c


def test_sl_simulation_rejects_unknown_learner():
    levels = {"n": 30, "q": 6, "ENE": 6, "beta.mu": 1.0, "sigma": 1.0,
              "x.cor": 0.0, "model": "forest"}
    with pytest.raises(ValidationError):
        sl_logit_r2(levels, {"test_size": 100}, 1)


def test_population_spec_validation():
    with pytest.raises(ValidationError):
        PopulationSpec(q=1, n=10, ene=1, beta_mu=1, sigma=1, x_cor=0)
    with pytest.raises(ValidationError):
        PopulationSpec(q=4, n=0, ene=1, beta_mu=1, sigma=1, x_cor=0)
    with pytest.raises(ValidationError):
        PopulationSpec(q=4, n=10, ene=1, beta_mu=1, sigma=0, x_cor=0)
    with pytest.raises(InvalidCorrelation):
        PopulationSpec(q=4, n=10, ene=1, beta_mu=1, sigma=1, x_cor=1.0)
