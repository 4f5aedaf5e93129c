"""Lasso and adaptive lasso with K-fold cross-validation.

The objective is ``||Y - b0 - X beta||^2 + lam * sum |beta_j|`` on the
original coefficient scale. Columns are centred (absorbing the intercept)
and scaled to unit norm inside the solver purely as a preconditioner; the
penalty is carried over as ``lam * ||x_j||`` per standardized coordinate,
so the minimizer is the same one the original-scale objective defines.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import RegressionDataset, ols_fit
from .errors import InvalidArgumentError, NumericalFailure

CD_TOL = 1e-9
MAX_SWEEPS = 100_000
GRID_SIZE = 100
GRID_DECADES = 4.0
WEIGHT_CAP = 1e12


@dataclass(frozen=True)
class LassoPath:
    lambda_grid: np.ndarray  # descending
    coefficients: np.ndarray  # (grid, p)
    intercepts: np.ndarray


class _Standardized:
    """Centred, unit-norm view of a design, with Gram matrix."""

    def __init__(self, X, Y):
        self.x_mean = X.mean(axis=0)
        self.y_mean = Y.mean()
        Xc = X - self.x_mean
        self.yc = Y - self.y_mean
        norms = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
        self.live = norms > 0
        self.norms = np.where(self.live, norms, 1.0)
        self.Xs = Xc / self.norms
        self.Xs[:, ~self.live] = 0.0
        self.G = self.Xs.T @ self.Xs
        np.fill_diagonal(self.G, np.where(self.live, 1.0, 0.0))
        self.c = self.Xs.T @ self.yc

    def lambda_max(self):
        # smallest lam with an all-zero solution: |x_j' yc| <= lam / 2 for all j
        return 2.0 * float(np.max(np.abs(self.c * self.norms)))

    def solve(self, lam, warm=None):
        pen = lam / self.norms
        beta = np.zeros(self.c.size) if warm is None else warm.copy()
        sweeps, ok = _kernels.lasso_cd_gram(self.G, self.c, pen, beta, CD_TOL, MAX_SWEEPS)
        if not ok:
            raise NumericalFailure(f"coordinate descent did not converge in {MAX_SWEEPS} sweeps")
        return beta

    def unscale(self, beta_s):
        beta = np.where(self.live, beta_s / self.norms, 0.0)
        return beta, float(self.y_mean - self.x_mean @ beta)


def _check_lambda(lam):
    if not (lam >= 0 and np.isfinite(lam)):
        raise InvalidArgumentError("lambda must be a nonnegative finite number")


def lasso_cd(dataset: RegressionDataset, lam: float) -> np.ndarray:
    """Lasso coefficients (intercept excluded; see :func:`lasso_intercept`)."""
    _check_lambda(lam)
    st = _Standardized(dataset.X, dataset.Y)
    beta, _ = st.unscale(st.solve(lam))
    return beta


def lasso_intercept(dataset: RegressionDataset, beta) -> float:
    return float(dataset.Y.mean() - dataset.X.mean(axis=0) @ np.asarray(beta, dtype=float))


def kkt_violation(dataset: RegressionDataset, beta, lam: float) -> float:
    """Largest breach of the lasso optimality conditions, on the standardized scale.

    Zero coordinates need ``|x_j' r| <= lam/2``; nonzero ones need
    ``x_j' r = sign(beta_j) lam/2``, with ``x_j`` centred and ``r`` the
    centred residual.
    """
    st = _Standardized(dataset.X, dataset.Y)
    beta = np.asarray(beta, dtype=float)
    grad = st.Xs.T @ (st.yc - (dataset.X - st.x_mean) @ beta)
    half = 0.5 * lam / st.norms
    zero = beta == 0
    viol = np.where(zero, np.maximum(np.abs(grad) - half, 0.0),
                    np.abs(grad - np.sign(beta) * half))
    return float(np.max(np.where(st.live, viol, 0.0)))


def lambda_grid(dataset: RegressionDataset, size=GRID_SIZE, decades=GRID_DECADES):
    lmax = _Standardized(dataset.X, dataset.Y).lambda_max()
    if lmax <= 0:
        raise InvalidArgumentError("response is constant; no lambda grid")
    return np.geomspace(lmax, lmax * 10.0 ** -decades, size)


def lasso_path(dataset: RegressionDataset, lambdas) -> LassoPath:
    """Warm-started solutions along a descending lambda sequence."""
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) > 0):
        raise InvalidArgumentError("lambda sequence must be descending")
    st = _Standardized(dataset.X, dataset.Y)
    coefs = np.empty((lambdas.size, dataset.p))
    icpts = np.empty(lambdas.size)
    warm = None
    for k, lam in enumerate(lambdas):
        _check_lambda(lam)
        warm = st.solve(lam, warm)
        coefs[k], icpts[k] = st.unscale(warm)
    return LassoPath(lambdas, coefs, icpts)


def _rescaled(dataset, weights):
    w = np.asarray(weights, dtype=float)
    if w.shape != (dataset.p,) or np.any(~(w > 0)):
        raise InvalidArgumentError("weights must be a positive vector of length p")
    return RegressionDataset(dataset.X / w, dataset.Y), w


def cv_select_lambda(dataset: RegressionDataset, folds: int = 5, weights=None,
                     rng: np.random.Generator | None = None) -> float:
    """Lambda minimizing K-fold held-out squared error over a log grid.

    The grid runs 4 decades down from the full-data ``lambda_max``. Since
    the loss is a sum over rows, each fold fits with lambda scaled by its
    share of the rows so every fold solves the same per-row problem.
    ``weights`` applies the adaptive penalty ``lam * sum w_j |beta_j|``.
    """
    n = dataset.n
    if folds < 2 or folds > n:
        raise InvalidArgumentError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    if rng is None:
        rng = np.random.default_rng()
    data = dataset if weights is None else _rescaled(dataset, weights)[0]
    grid = lambda_grid(data)
    perm = rng.permutation(n)
    parts = np.array_split(perm, folds)
    err = np.zeros(grid.size)
    for held in parts:
        train_rows = np.setdiff1d(perm, held)
        if train_rows.size < 2:
            raise InvalidArgumentError("a training fold has fewer than two rows")
        train = data.subset(train_rows)
        path = lasso_path(train, grid * (train_rows.size / n))
        pred = path.intercepts[:, None] + path.coefficients @ data.X[held].T
        err += np.sum((data.Y[held][None, :] - pred) ** 2, axis=1)
    return float(grid[int(np.argmin(err))])


def adaptive_lasso_weights(dataset: RegressionDataset) -> np.ndarray:
    """``1 / |beta_ols|``, capped so a zero OLS coordinate is effectively excluded."""
    beta = ols_fit(dataset).beta_hat
    with np.errstate(divide="ignore"):
        w = 1.0 / np.abs(beta)
    return np.minimum(w, WEIGHT_CAP)


def adaptive_lasso(dataset: RegressionDataset, rng: np.random.Generator | None = None,
                   lam: float | None = None, folds: int = 5) -> np.ndarray:
    """Adaptive lasso with weights ``1/|beta_ols|``; lambda by CV unless given."""
    w = adaptive_lasso_weights(dataset)
    scaled, _ = _rescaled(dataset, w)
    if lam is None:
        lam = cv_select_lambda(dataset, folds=folds, weights=w, rng=rng)
    return lasso_cd(scaled, lam) / w
