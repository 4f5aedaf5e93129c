"""Regression datasets, the correlated Gaussian design, OLS and orthogonalization."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, SingularityError

ORTHO_RTOL = 1e-8

EXAMPLE_BETAS = {
    1: (3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0),
    2: (3.0, 1.5, 0.1, 0.01, 2.0, 0.0, 0.0, 0.0),
}
EXAMPLE_CORR = 0.5


@dataclass(frozen=True)
class RegressionDataset:
    X: np.ndarray
    Y: np.ndarray
    beta_true: np.ndarray | None = None
    sigma_true: float | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim != 2 or Y.ndim != 1:
            raise InvalidArgumentError("X must be 2-d and Y 1-d")
        if X.shape[0] != Y.shape[0]:
            raise InvalidArgumentError(
                f"X has {X.shape[0]} rows but Y has length {Y.shape[0]}")
        if X.shape[1] < 1:
            raise InvalidArgumentError("design needs at least one column")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        if self.beta_true is not None:
            beta = np.asarray(self.beta_true, dtype=float)
            if beta.shape != (X.shape[1],):
                raise InvalidArgumentError("beta_true must have length p")
            object.__setattr__(self, "beta_true", beta)
        if self.sigma_true is not None and self.sigma_true < 0:
            raise InvalidArgumentError("sigma_true must be nonnegative")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def true_support(self) -> np.ndarray | None:
        """Indices (0-based) of nonzero true coefficients."""
        if self.beta_true is None:
            return None
        return np.flatnonzero(self.beta_true != 0)

    def subset(self, rows) -> "RegressionDataset":
        rows = np.asarray(rows)
        return replace(self, X=self.X[rows], Y=self.Y[rows])


@dataclass(frozen=True)
class GaussianDesignSpec:
    n: int
    p: int
    pairwise_corr: float = EXAMPLE_CORR

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise InvalidArgumentError("n and p must be positive")
        if not 0.0 <= self.pairwise_corr < 1.0:
            raise InvalidArgumentError("pairwise_corr must lie in [0, 1)")

    def correlation_matrix(self) -> np.ndarray:
        rho = self.pairwise_corr
        return (1.0 - rho) * np.eye(self.p) + rho * np.ones((self.p, self.p))


@dataclass(frozen=True)
class OlsFit:
    beta_hat: np.ndarray
    sigma2_hat: float
    is_orthogonal: bool
    n: int = field(default=0)


def generate_design(spec: GaussianDesignSpec, rng: np.random.Generator) -> np.ndarray:
    # equicorrelated rows via one shared factor: x = sqrt(1-rho) z + sqrt(rho) w 1
    rho = spec.pairwise_corr
    Z = rng.standard_normal((spec.n, spec.p))
    W = rng.standard_normal((spec.n, 1))
    return np.sqrt(1.0 - rho) * Z + np.sqrt(rho) * W


def generate_dataset(spec: GaussianDesignSpec, beta, sigma: float,
                     rng: np.random.Generator) -> RegressionDataset:
    """Draw a dataset ``Y = X beta + eps`` with an equicorrelated Gaussian design.

    Rows of ``X`` are i.i.d. zero-mean Gaussian with unit variances and
    correlation ``spec.pairwise_corr`` between every pair of columns;
    ``eps`` is i.i.d. ``N(0, sigma^2)``. ``sigma = 0`` gives noiseless
    responses.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (spec.p,):
        raise InvalidArgumentError(f"beta has length {beta.size}, expected p={spec.p}")
    if sigma < 0:
        raise InvalidArgumentError("sigma must be nonnegative")
    X = generate_design(spec, rng)
    eps = rng.standard_normal(spec.n)
    Y = X @ beta + sigma * eps
    return RegressionDataset(X, Y, beta_true=beta, sigma_true=float(sigma))


def responses_for(X: np.ndarray, beta, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Fresh responses for a fixed design (used after orthogonalizing)."""
    beta = np.asarray(beta, dtype=float)
    return X @ beta + sigma * rng.standard_normal(X.shape[0])


def is_orthogonal_design(X: np.ndarray, rtol: float = ORTHO_RTOL) -> bool:
    n, p = X.shape
    return bool(np.max(np.abs(X.T @ X - n * np.eye(p))) <= rtol * n)


def orthogonalize(dataset: RegressionDataset) -> RegressionDataset:
    """Return a dataset whose design satisfies ``X^T X = n I``.

    Columns are orthogonalized with modified Gram-Schmidt and rescaled to
    norm ``sqrt(n)``. ``Y`` is kept; ``beta_true`` is dropped because it no
    longer describes the transformed design.
    """
    X = dataset.X.copy()
    n, p = X.shape
    if n < p:
        raise SingularityError(f"cannot orthogonalize {n}x{p} design: n < p")
    norms0 = np.linalg.norm(X, axis=0)
    if np.any(norms0 == 0):
        raise SingularityError("design has a zero column")
    Q = np.empty_like(X)
    for j in range(p):
        v = X[:, j].copy()
        for k in range(j):
            v -= (Q[:, k] @ v) * Q[:, k]
        nv = np.linalg.norm(v)
        if nv <= 1e-10 * norms0[j]:
            raise SingularityError(f"column {j} is linearly dependent on earlier columns")
        Q[:, j] = v / nv
    Q *= np.sqrt(n)
    return RegressionDataset(Q, dataset.Y.copy(), beta_true=None,
                             sigma_true=dataset.sigma_true)


def ols_fit(dataset: RegressionDataset) -> OlsFit:
    X, Y = dataset.X, dataset.Y
    n, p = X.shape
    if n <= p:
        raise InvalidArgumentError(f"OLS needs n > p (got n={n}, p={p})")
    if np.linalg.matrix_rank(X) < p:
        raise SingularityError("X^T X is singular")
    beta_hat = np.linalg.lstsq(X, Y, rcond=None)[0]
    resid = Y - X @ beta_hat
    sigma2 = float(resid @ resid / (n - p))
    return OlsFit(beta_hat=beta_hat, sigma2_hat=sigma2,
                  is_orthogonal=is_orthogonal_design(X), n=n)


def write_csv(dataset: RegressionDataset, path) -> None:
    """Write ``y,x1,...,xp`` with 17 significant digits."""
    p = dataset.p
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y"] + [f"x{j + 1}" for j in range(p)])
        for y, row in zip(dataset.Y, dataset.X):
            w.writerow([f"{y:.17g}"] + [f"{v:.17g}" for v in row])


def read_csv(path) -> RegressionDataset:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "y":
            raise InvalidArgumentError(f"{path}: header must start with 'y'")
        rows = [[float(v) for v in r] for r in reader if r]
    if not rows:
        raise InvalidArgumentError(f"{path}: no data rows")
    arr = np.asarray(rows)
    if arr.shape[1] != len(header):
        raise InvalidArgumentError(f"{path}: ragged rows")
    return RegressionDataset(arr[:, 1:], arr[:, 0])
