"""Data generation and learners for the statistical-learning case study.

Populations are linear models over an expanded predictor set: q measured
variables drawn multivariate normal with AR(1)-style decaying correlation,
plus all q(q-1)/2 pairwise products, for p = q(q+1)/2 predictors total.
Active coefficients follow the effect-heredity prior; the response of a
study run is the logistic transform of squared test-set correlation.

Products of standard normals already have mean 0 and variance 1 under
independence, so predictor columns are not re-standardized.  When the
adjacent correlation is positive, product-column variance inflates mildly
(var(z_i z_j) = 1 + cor^2) and product columns gain a nonzero mean equal to
the pair's correlation; the learners center columns internally, which
absorbs the mean shift.

The second learner is ridge regression behind the same pluggable interface
as the lasso, keeping the study runnable at desk scale; swap in any
fit(train, folds, seed) -> predictor callable via LEARNERS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (CholeskyFailure, DegenerateDesign, InvalidCorrelation,
                     ValidationError)
from .heredity import ActivityPattern, pair_order, sample_pattern, solve_heredity_params
from .registry import register_simulation
from .seeds import derive_seed

LOGIT_CLAMP = 1e-8


@dataclass(frozen=True)
class PopulationSpec:
    q: int
    n: int
    ene: float
    beta_mu: float
    sigma: float
    x_cor: float

    def __post_init__(self):
        if self.q < 2:
            raise ValidationError("need q >= 2 measured variables")
        if self.n < 1:
            raise ValidationError("training size must be >= 1")
        if self.sigma <= 0:
            raise ValidationError("error SD must be positive")
        if not 0.0 <= self.x_cor < 1.0:
            raise InvalidCorrelation(
                f"x_cor must lie in [0, 1), got {self.x_cor}")

    @property
    def p(self) -> int:
        return self.q * (self.q + 1) // 2


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    pattern: ActivityPattern
    beta: np.ndarray

    def __post_init__(self):
        q = self.pattern.q
        if self.X.shape[1] != q * (q + 1) // 2:
            raise ValidationError("X must have q(q+1)/2 columns")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def covariance_matrix(q: int, x_cor: float) -> np.ndarray:
    """Correlation matrix with entries x_cor^|i-j| (identity at x_cor = 0)."""
    if not 0.0 <= x_cor < 1.0:
        raise InvalidCorrelation(f"x_cor must lie in [0, 1), got {x_cor}")
    if x_cor == 0.0:
        return np.eye(q)
    d = np.abs(np.subtract.outer(np.arange(q), np.arange(q)))
    return x_cor ** d


def column_names(q: int) -> list[str]:
    names = [f"x{i + 1}" for i in range(q)]
    names += [f"x{i + 1}*x{j + 1}" for i, j in pair_order(q)]
    return names


def coefficient_vector(q: int, pattern: ActivityPattern,
                       beta_mu: float) -> np.ndarray:
    beta = np.zeros(q * (q + 1) // 2)
    for i in pattern.active_mains:
        beta[i] = beta_mu
    pairs = {pair: k for k, pair in enumerate(pair_order(q))}
    for pair in pattern.active_interactions:
        beta[q + pairs[pair]] = beta_mu
    return beta


def generate_dataset(spec: PopulationSpec, pattern: ActivityPattern,
                     seed: int, n_rows: int | None = None) -> Dataset:
    """Draw measured variables, expand products, add linear signal and noise."""
    if pattern.q != spec.q:
        raise ValidationError("pattern was drawn for a different q")
    n = spec.n if n_rows is None else int(n_rows)
    try:
        chol = np.linalg.cholesky(covariance_matrix(spec.q, spec.x_cor))
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure(f"correlation matrix not PD: {exc}") from exc
    rng = np.random.default_rng(np.uint64(seed))
    z = rng.standard_normal((n, spec.q)) @ chol.T
    products = np.empty((n, spec.q * (spec.q - 1) // 2))
    for k, (i, j) in enumerate(pair_order(spec.q)):
        products[:, k] = z[:, i] * z[:, j]
    x = np.hstack([z, products])
    beta = coefficient_vector(spec.q, pattern, spec.beta_mu)
    y = x @ beta + spec.sigma * rng.standard_normal(n)
    return Dataset(x, y, pattern, beta)


# ---------------------------------------------------------------------------
# Lasso: cyclic coordinate descent over a pathwise grid with warm starts


@dataclass(frozen=True)
class LinearPredictor:
    name: str
    intercept: float
    coef: np.ndarray
    penalty: float
    excluded: tuple[int, ...] = ()

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + X @ self.coef


def _lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    lam_max = float(np.abs(xc.T @ yc).max()) / len(y)
    if lam_max <= 0:
        raise DegenerateDesign("all predictor columns are orthogonal to y")
    return lam_max


def lambda_grid(X: np.ndarray, y: np.ndarray, n_values: int = 100,
                min_ratio: float = 1e-3) -> np.ndarray:
    """Descending log grid from lambda_max = max_j |x_j'y|/n (columns centered)."""
    lam_max = _lambda_max(X, y)
    return np.geomspace(lam_max, lam_max * min_ratio, n_values)


def _soft(v: float, t: float) -> float:
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


def _cd_sweep(gram: np.ndarray, diag: np.ndarray, lam: float,
              beta: np.ndarray, grad: np.ndarray, indices) -> float:
    """One pass of coordinate updates; returns the largest scaled step.

    grad maintains cxy - gram @ beta and is updated in place alongside beta.
    """
    worst = 0.0
    for j in indices:
        dj = diag[j]
        if dj <= 0.0:
            continue
        bj = beta[j]
        rho = grad[j] + dj * bj
        bnew = _soft(rho, lam) / dj
        if bnew != bj:
            step = bnew - bj
            np.subtract(grad, gram[:, j] * step, out=grad)
            beta[j] = bnew
            worst = max(worst, step * step * dj)
    return worst


def _kkt_gap(grad: np.ndarray, beta: np.ndarray, lam: float) -> float:
    """Max stationarity violation given the exact gradient cxy - G b."""
    zero = beta == 0.0
    gap = 0.0
    if zero.any():
        gap = max(gap, float(np.abs(grad[zero]).max()) - lam)
    if not zero.all():
        active = ~zero
        gap = max(gap, float(np.abs(grad[active]
                                    - lam * np.sign(beta[active])).max()))
    return gap


def _cd_solve(gram: np.ndarray, cxy: np.ndarray, lam: float, lam_prev: float,
              beta: np.ndarray, grad: np.ndarray, tol: float,
              kkt_tol: float | None = None, max_rounds: int = 200,
              max_sweeps: int = 2000) -> None:
    """One lasso solve at fixed lambda; beta/grad updated in place.

    Coordinates are swept over a working set seeded by the current support
    plus the strong-rule candidates |grad_j| >= 2*lam - lam_prev.  Because
    grad is maintained incrementally, the screening check over all
    coordinates is a single vectorized comparison; violators join the set
    and the sweep repeats, so screening never changes the solution.

    kkt_tol switches on a polish phase: the gradient is recomputed exactly
    (clearing incremental roundoff) and sweeps continue at tightening step
    tolerance until the stationarity gap falls below kkt_tol.
    """
    diag = np.ascontiguousarray(np.diagonal(gram))
    in_set = (beta != 0.0) | (np.abs(grad) >= 2.0 * lam - lam_prev)
    work = np.flatnonzero(in_set).tolist()
    for _ in range(max_rounds):
        for _ in range(max_sweeps):
            if _cd_sweep(gram, diag, lam, beta, grad, work) <= tol:
                break
        else:
            raise ValidationError("coordinate descent failed to converge")
        violators = np.flatnonzero(~in_set & (np.abs(grad) > lam))
        if violators.size == 0:
            break
        in_set[violators] = True
        work.extend(violators.tolist())
    else:
        raise ValidationError("coordinate descent failed to converge")
    if kkt_tol is None:
        return
    # Polish: each round refreshes the gradient exactly (clearing the
    # incremental-update roundoff) and sweeps the support plus all
    # violating coordinates; progress is measured only by the KKT gap,
    # which is robust to the flat directions a rank-deficient Gram has.
    for _ in range(20000):
        grad[:] = cxy - gram @ beta
        if _kkt_gap(grad, beta, lam) <= kkt_tol:
            return
        sweep_ix = np.flatnonzero((beta != 0.0) | (np.abs(grad) > lam))
        for _ in range(5):
            if _cd_sweep(gram, diag, lam, beta, grad,
                         sweep_ix.tolist()) <= 1e-18:
                break
    raise ValidationError("lasso polish failed to reach the KKT tolerance")


def _gram_prep(X: np.ndarray, y: np.ndarray):
    n = len(y)
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    gram = xc.T @ xc / n
    cxy = xc.T @ yc / n
    if not np.any(np.diagonal(gram) > 0):
        raise DegenerateDesign("every predictor column is constant")
    scale = max(float(np.mean(yc ** 2)), 1e-30)
    return gram, cxy, scale


def lasso_path(X: np.ndarray, y: np.ndarray, lambdas: np.ndarray,
               tol: float = 1e-7,
               final_kkt_tol: float | None = None) -> np.ndarray:
    """Coefficients at each lambda (descending), warm-started down the path.

    Objective: (1/2n)||y - Xb||^2 + lambda*||b||_1 on centered data; the
    intercept is recovered by the caller.  Zero-variance columns are
    excluded (coefficient pinned at 0).  tol scales with the response
    variance and suffices for cross-validation; final_kkt_tol additionally
    polishes the last grid point to that stationarity gap.
    """
    gram, cxy, scale = _gram_prep(X, y)
    beta = np.zeros(X.shape[1])
    grad = cxy.copy()
    out = np.empty((len(lambdas), X.shape[1]))
    lam_prev = float(lambdas[0])
    last = len(lambdas) - 1
    for k, lam in enumerate(lambdas):
        kkt = final_kkt_tol if k == last else None
        _cd_solve(gram, cxy, float(lam), lam_prev, beta, grad, tol * scale,
                  kkt_tol=kkt)
        out[k] = beta
        lam_prev = float(lam)
    return out


def _cv_folds(n: int, folds: int, seed: int) -> list[np.ndarray]:
    if not 2 <= folds <= n:
        raise ValidationError(f"need n >= folds >= 2, got n={n}, folds={folds}")
    rng = np.random.default_rng(np.uint64(seed))
    perm = rng.permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def _cv_select(X: np.ndarray, y: np.ndarray, lambdas: np.ndarray,
               folds: int, seed: int,
               path_fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
               ) -> int:
    """Index of the lambda minimizing mean CV squared error (ties: larger
    lambda, i.e. the earlier grid position)."""
    n = len(y)
    fold_ix = _cv_folds(n, folds, seed)
    mse = np.zeros(len(lambdas))
    for held in fold_ix:
        mask = np.ones(n, dtype=bool)
        mask[held] = False
        xt, yt = X[mask], y[mask]
        coefs = path_fn(xt, yt, lambdas)
        intercepts = yt.mean() - xt.mean(axis=0) @ coefs.T
        pred = X[held] @ coefs.T + intercepts
        mse += ((pred - y[held][:, None]) ** 2).sum(axis=0)
    return int(np.argmin(mse))


def lasso_cv(train: Dataset, folds: int = 10, seed: int = 0,
             n_lambdas: int = 100, min_ratio: float = 1e-3) -> LinearPredictor:
    """Pathwise lasso with the penalty chosen by k-fold cross-validation."""
    X, y = train.X, train.y
    lambdas = lambda_grid(X, y, n_lambdas, min_ratio)
    best = _cv_select(X, y, lambdas, folds, seed, lasso_path)
    coef = lasso_path(X, y, lambdas[:best + 1], tol=1e-9,
                      final_kkt_tol=1e-8)[-1]
    intercept = float(y.mean() - X.mean(axis=0) @ coef)
    excluded = tuple(int(j) for j in np.flatnonzero(X.var(axis=0) == 0.0))
    return LinearPredictor("lasso", intercept, coef, float(lambdas[best]),
                           excluded)


def kkt_violation(X: np.ndarray, y: np.ndarray, coef: np.ndarray,
                  lam: float) -> float:
    """Max violation of the lasso stationarity conditions on centered data."""
    n = len(y)
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    grad = xc.T @ (yc - xc @ coef) / n
    worst = 0.0
    for j in range(len(coef)):
        if coef[j] == 0.0:
            worst = max(worst, abs(grad[j]) - lam)
        else:
            worst = max(worst, abs(grad[j] - lam * math.copysign(1.0, coef[j])))
    return worst


# ---------------------------------------------------------------------------
# Ridge baseline (stands in for a heavier second learner)


def ridge_solve(X: np.ndarray, y: np.ndarray, lam: float) -> tuple[float, np.ndarray]:
    """Minimize (1/2n)||y - b0 - Xb||^2 + (lam/2)||b||^2 via SVD."""
    n = len(y)
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    u, d, vt = np.linalg.svd(xc, full_matrices=False)
    shrink = d / (d ** 2 + n * lam)
    coef = vt.T @ (shrink * (u.T @ yc))
    intercept = float(y.mean() - X.mean(axis=0) @ coef)
    return intercept, coef


def _ridge_path(X: np.ndarray, y: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
    n = len(y)
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    u, d, vt = np.linalg.svd(xc, full_matrices=False)
    uty = u.T @ yc
    out = np.empty((len(lambdas), X.shape[1]))
    for k, lam in enumerate(lambdas):
        out[k] = vt.T @ ((d / (d ** 2 + n * lam)) * uty)
    return out


def ridge_cv(train: Dataset, folds: int = 10, seed: int = 0,
             n_lambdas: int = 100,
             n_columns: int | None = None) -> LinearPredictor:
    """Ridge regression with the penalty chosen by k-fold CV over a log grid.

    n_columns restricts the fit to the leading predictor columns; the
    returned coefficient vector is padded with zeros so predictions still
    take the full expanded matrix.
    """
    X, y = train.X, train.y
    used = X if n_columns is None else X[:, :n_columns]
    anchor = _lambda_max(used, y)
    lambdas = np.geomspace(anchor * 1e3, anchor * 1e-4, n_lambdas)
    best = _cv_select(used, y, lambdas, folds, seed, _ridge_path)
    intercept, coef = ridge_solve(used, y, float(lambdas[best]))
    full = coef
    if n_columns is not None:
        full = np.zeros(X.shape[1])
        full[:n_columns] = coef
    return LinearPredictor("ridge", intercept, full, float(lambdas[best]))


def baseline_ridge(train: Dataset, folds: int = 10,
                   seed: int = 0) -> LinearPredictor:
    """The study's second learner: ridge on the q measured-variable columns.

    Restricting to the measured variables matches the input interface of
    the heavier nonlinear learner this baseline stands in for, and keeps
    the two learners qualitatively distinct: the lasso's model form matches
    the data-generating mechanism, the baseline's does not.
    """
    return ridge_cv(train, folds=folds, seed=seed,
                    n_columns=train.pattern.q)


LEARNERS: dict[str, Callable[..., LinearPredictor]] = {
    "lasso": lasso_cv,
    "ridge": baseline_ridge,
}


# ---------------------------------------------------------------------------
# Study response


def r_squared(y: np.ndarray, yhat: np.ndarray) -> float:
    """Squared Pearson correlation; 0 when either side is constant."""
    if np.std(yhat) == 0.0 or np.std(y) == 0.0:
        return 0.0
    r = np.corrcoef(y, yhat)[0, 1]
    return float(r * r)


def logit_r2(r2: float) -> float:
    r2 = min(max(r2, LOGIT_CLAMP), 1.0 - LOGIT_CLAMP)
    return math.log(r2 / (1.0 - r2))


def evaluate(predictor: LinearPredictor, test: Dataset) -> float:
    """logit R^2 of the predictor on an independent test set."""
    if test.n == 0:
        raise ValidationError("test set is empty")
    return logit_r2(r_squared(test.y, predictor.predict(test.X)))


@register_simulation("sl_logit_r2")
def sl_logit_r2(levels, params, seed: int) -> float:
    """One study run: draw population, fit the run's learner, score on test."""
    spec = PopulationSpec(
        q=int(levels["q"]), n=int(levels["n"]), ene=float(levels["ENE"]),
        beta_mu=float(levels["beta.mu"]), sigma=float(levels["sigma"]),
        x_cor=float(levels["x.cor"]))
    model = str(levels["model"])
    if model not in LEARNERS:
        raise ValidationError(f"unknown learner {model!r}")
    test_size = int(params.get("test_size", 10000))
    folds = int(params.get("folds", 10))
    hp = solve_heredity_params(spec.ene, spec.q)
    pattern = sample_pattern(hp, derive_seed(seed, 1))
    train = generate_dataset(spec, pattern, derive_seed(seed, 2))
    test = generate_dataset(spec, pattern, derive_seed(seed, 3),
                            n_rows=test_size)
    fit = LEARNERS[model](train, folds=folds, seed=derive_seed(seed, 4))
    return evaluate(fit, test)
