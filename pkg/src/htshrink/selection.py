"""Half-thresholding selection and evaluation metrics.

Indices are 0-based throughout the library; the CLI and CSV outputs print
them 1-based.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RegressionDataset
from .errors import InvalidArgumentError

HT_THRESHOLD = 0.5


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple  # sorted 0-based indices
    ht_estimates: np.ndarray
    ratios: np.ndarray  # beta_pm / beta_ols, NaN where beta_ols == 0


def ht_select(beta_pm, beta_ols) -> SelectionResult:
    """Keep coordinate i iff ``|beta_pm_i / beta_ols_i| > 1/2``.

    A zero OLS coordinate is never selected. Unselected HT estimates are
    exactly zero, selected ones equal the posterior mean.
    """
    pm = np.asarray(beta_pm, dtype=float)
    ols = np.asarray(beta_ols, dtype=float)
    if pm.shape != ols.shape or pm.ndim != 1:
        raise InvalidArgumentError("beta_pm and beta_ols must be vectors of equal length")
    nonzero = ols != 0
    ratios = np.full(pm.shape, np.nan)
    with np.errstate(over="ignore"):  # an infinite ratio still compares correctly
        ratios[nonzero] = pm[nonzero] / ols[nonzero]
    keep = nonzero & (np.abs(np.where(nonzero, ratios, 0.0)) > HT_THRESHOLD)
    ht = np.where(keep, pm, 0.0)
    return SelectionResult(selected=tuple(int(i) for i in np.flatnonzero(keep)),
                           ht_estimates=ht, ratios=ratios)


def _as_index_set(indices, p, what):
    s = {int(i) for i in indices}
    if any(i < 0 or i >= p for i in s):
        raise InvalidArgumentError(f"{what} index out of range 0..{p - 1}")
    return s


def misclassification(selected, true_support, p: int) -> float:
    """Fraction of the p variables whose in/out status is wrong."""
    if p < 1:
        raise InvalidArgumentError("p must be positive")
    a = _as_index_set(selected, p, "selected")
    b = _as_index_set(true_support, p, "true support")
    return len(a ^ b) / p


def rpe(coefficients, test: RegressionDataset, sigma2: float, intercept: float = 0.0) -> float:
    """Relative prediction error: mean squared test residual over ``sigma2``.

    Its expectation is ``1 + E[(x'(b - beta))^2] / sigma2``, so the true
    coefficients score about 1.
    """
    if test.n == 0:
        raise InvalidArgumentError("empty test set")
    if not sigma2 > 0:
        raise InvalidArgumentError("sigma2 must be positive")
    coef = np.asarray(coefficients, dtype=float)
    if coef.shape != (test.p,):
        raise InvalidArgumentError("coefficient length does not match the test design")
    resid = test.Y - (test.X @ coef + intercept)
    return float(np.mean(resid ** 2) / sigma2)


def model_size(selected) -> int:
    return len(set(selected))
