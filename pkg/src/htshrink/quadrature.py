"""Exact posterior shrinkage for orthogonal designs.

With ``X^T X = n I`` each coefficient is an independent one-dimensional
problem: ``beta_hat_i | gamma_i ~ N(0, sigma^2 (1 + n tau gamma_i) / n)``
and the posterior mean is ``(1 - E(s_i | Y)) beta_hat_i`` with shrinkage
factor ``s_i = 1 / (1 + n tau gamma_i)``.

Posterior expectations are ratios of one-dimensional integrals. They are
computed in the log-odds coordinate of the shrinkage factor,
``u = logit(1 - s) = log(n tau gamma)``, where ``s = expit(-u)`` and
``1 - s = expit(u)`` are both available to full relative precision. The
posterior density of ``u`` is proportional to::

    pi(gamma) * gamma * (1 + e^u)^(-1/2) * exp(-kappa * s),
    kappa = n beta_hat^2 / (2 sigma^2)

Everything is evaluated in the log domain and exponentiated after
subtracting one shared shift, so numerator and denominator overflow
together or not at all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import stats
from scipy.optimize import minimize_scalar
from scipy.special import expit, log_ndtr, ndtr

from .data import OlsFit
from .errors import DomainError, InvalidArgumentError, NumericalFailure, UnsupportedOperationError
from .priors import PriorSpec, log_density_log_gamma, sample_gamma

RTOL = 1e-8
EVAL_BUDGET = 1_000_000
_LOG_DROP = 60.0  # integrand below exp(-60) of its peak is ignored
_GRID_STEP = 0.1

_X_LO, _W_LO = leggauss(10)
_X_HI, _W_HI = leggauss(20)


@dataclass(frozen=True)
class ShrinkageQuery:
    prior: PriorSpec
    n: int
    tau: float
    beta_hat: float
    sigma2: float

    def __post_init__(self):
        if not (self.n >= 1):
            raise InvalidArgumentError("n must be >= 1")
        if not (self.tau > 0 and np.isfinite(self.tau)):
            raise InvalidArgumentError("tau must be positive")
        if not (self.sigma2 > 0 and np.isfinite(self.sigma2)):
            raise InvalidArgumentError("sigma2 must be positive")
        if not np.isfinite(self.beta_hat):
            raise InvalidArgumentError("beta_hat must be finite")

    @property
    def kappa(self) -> float:
        return self.n * self.beta_hat ** 2 / (2.0 * self.sigma2)

    @property
    def log_ntau(self) -> float:
        return math.log(self.n) + math.log(self.tau)


@dataclass(frozen=True)
class ShrinkageResult:
    expected_shrinkage: float  # E(s | Y)
    complement: float  # E(1 - s | Y), computed directly rather than as 1 - E(s)
    abs_error_estimate: float
    evaluations: int


class _Counter:
    def __init__(self, budget):
        self.count = 0
        self.budget = budget

    def add(self, k):
        self.count += k


def _log_kernel(q: ShrinkageQuery):
    lt = q.log_ntau
    kappa = q.kappa
    prior = q.prior

    def logf(u):
        u = np.asarray(u, dtype=float)
        lg = u - lt
        return (log_density_log_gamma(prior, lg) + lg
                - 0.5 * np.logaddexp(0.0, u) - kappa * expit(-u))

    return logf


def _explore(logf, centers, counter):
    """Locate the support of the integrand and its modes.

    Returns (lo, hi, shift, breakpoints).
    """
    lo = min(centers) - 50.0
    hi = max(centers) + 50.0
    grid = np.arange(lo, hi + 0.5 * _GRID_STEP, _GRID_STEP)
    with np.errstate(invalid="ignore"):
        vals = logf(grid)
    counter.add(grid.size)
    if np.any(np.isnan(vals)):
        raise NumericalFailure("integrand is NaN on the exploration grid")
    lmax = np.max(vals)
    if not np.isfinite(lmax):
        raise NumericalFailure("integrand vanishes on the exploration grid")

    # refine every interior local maximum; narrow peaks can hide between grid points
    interior = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] > vals[2:])
                              & np.isfinite(vals[1:-1])) + 1
    if interior.size > 200:
        interior = interior[np.argsort(vals[interior])[-200:]]
    modes = []
    for i in interior:
        res = minimize_scalar(lambda x: -float(logf(x)), bounds=(grid[i - 1], grid[i + 1]),
                              method="bounded", options={"xatol": 1e-12})
        counter.add(res.nfev)
        m_val = -res.fun
        if m_val < vals[i]:
            m, m_val = grid[i], vals[i]
        else:
            m = res.x
        modes.append((m, m_val))
    if modes:
        lmax = max(lmax, max(v for _, v in modes))
    cut = lmax - _LOG_DROP

    sig = np.flatnonzero(vals > cut)
    breaks = []
    a = grid[max(sig[0] - 1, 0)]
    b = grid[min(sig[-1] + 1, grid.size - 1)]
    breaks.extend(np.arange(math.ceil(a), math.floor(b) + 1, 1.0))

    # extend tails outward until the integrand has dropped below the cut
    for direction in (-1.0, 1.0):
        edge = a if direction < 0 else b
        width = 50.0
        while float(logf(edge)) > cut:
            counter.add(1)
            breaks.append(edge)
            edge = edge + direction * width
            width *= 2.0
            if width > 1e6:
                raise NumericalFailure("integrand tail does not decay")
        if direction < 0:
            a = edge
        else:
            b = edge

    for m, m_val in modes:
        if m_val > cut:
            for k in range(8):
                breaks.extend((m - 10.0 ** -k, m + 10.0 ** -k))
            breaks.append(m)
    return a, b, lmax, breaks


def _panel_rules(a, b):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    lo = mid[:, None] + half[:, None] * _X_LO[None, :]
    hi = mid[:, None] + half[:, None] * _X_HI[None, :]
    return half, lo, hi


def _adaptive(logf, shift, edges, weight_fn, k, counter, rtol, atol_frac):
    """Adaptive Gauss-Legendre panels; returns (integrals, errors), each shape (k,).

    Every panel is integrated with 10- and 20-point rules; the difference is
    the (conservative) error estimate. Panels with the largest scaled error
    are bisected until the total error meets ``rtol * |I| + atol_frac * I_0``
    for every component.
    """
    a = edges[:-1].copy()
    b = edges[1:].copy()
    est = np.zeros((k, 0))
    err = np.zeros((k, 0))
    pa, pb = a, b
    keep_a = np.zeros(0)
    keep_b = np.zeros(0)
    while True:
        half, lo, hi = _panel_rules(pa, pb)
        pts = np.concatenate([lo.ravel(), hi.ravel()])
        counter.add(pts.size)
        with np.errstate(invalid="ignore", over="ignore"):
            vals = np.exp(logf(pts) - shift)
            w = weight_fn(pts)  # (k, npts)
        f = w * vals[None, :]
        if not np.all(np.isfinite(f)):
            raise NumericalFailure("non-finite integrand value")
        nlo = lo.size
        f_lo = f[:, :nlo].reshape(k, *lo.shape)
        f_hi = f[:, nlo:].reshape(k, *hi.shape)
        g_lo = half[None, :] * (f_lo @ _W_LO)
        g_hi = half[None, :] * (f_hi @ _W_HI)
        est = np.concatenate([est, g_hi], axis=1)
        err = np.concatenate([err, np.abs(g_hi - g_lo)], axis=1)
        keep_a = np.concatenate([keep_a, pa])
        keep_b = np.concatenate([keep_b, pb])

        total = est.sum(axis=1)
        total_err = err.sum(axis=1)
        tol = rtol * np.abs(total) + atol_frac * abs(total[0])
        if np.all(total_err <= tol):
            return total, total_err
        if counter.count > counter.budget:
            raise NumericalFailure(
                f"quadrature budget of {counter.budget} evaluations exhausted",
                best_estimate=total)
        score = np.max(err / np.maximum(tol, 1e-300)[:, None], axis=0)
        split = score >= 0.25 * score.max()
        mid = 0.5 * (keep_a[split] + keep_b[split])
        pa = np.concatenate([keep_a[split], mid])
        pb = np.concatenate([mid, keep_b[split]])
        keep_a, keep_b = keep_a[~split], keep_b[~split]
        est, err = est[:, ~split], err[:, ~split]


def _posterior_integrals(q: ShrinkageQuery, weight_fn, k, cuts=(), rtol=RTOL / 10):
    counter = _Counter(EVAL_BUDGET)
    logf = _log_kernel(q)
    lt = q.log_ntau
    centers = [lt]
    if q.kappa > 0.5:
        centers.append(math.log(2.0 * q.kappa - 1.0))  # peak of the likelihood factor
    lo, hi, shift, breaks = _explore(logf, centers, counter)
    pts = [lo, hi] + [x for x in list(breaks) + list(cuts) if lo < x < hi]
    edges = np.unique(np.asarray(pts, dtype=float))
    total, total_err = _adaptive(logf, shift, edges, weight_fn, k, counter,
                                 rtol=rtol, atol_frac=1e-16)
    return total, total_err, counter.count


def expected_shrinkage(q: ShrinkageQuery) -> ShrinkageResult:
    """Posterior mean of the shrinkage factor ``s = 1/(1 + n tau gamma)``."""

    def weights(u):
        return np.vstack([np.ones_like(u), expit(-u), expit(u)])

    total, err, evals = _posterior_integrals(q, weights, 3)
    den, num_s, num_c = total
    if not den > 0:
        raise NumericalFailure("posterior normalizing integral is not positive")
    es = num_s / den
    ec = num_c / den
    abs_err = (err[1] + es * err[0]) / den
    return ShrinkageResult(expected_shrinkage=float(es), complement=float(ec),
                           abs_error_estimate=float(abs_err), evaluations=int(evals))


def shrinkage_exceedance(q: ShrinkageQuery, eta: float) -> float:
    """Posterior probability ``P(s > eta | Y)``."""
    if not 0.0 < eta < 1.0:
        raise InvalidArgumentError("eta must lie in (0, 1)")
    # s > eta  <=>  u < log((1 - eta) / eta)
    u_cut = math.log1p(-eta) - math.log(eta)

    def weights(u):
        return np.vstack([np.ones_like(u), (u < u_cut).astype(float)])

    total, _, _ = _posterior_integrals(q, weights, 2, cuts=(u_cut,))
    return float(min(max(total[1] / total[0], 0.0), 1.0))


def posterior_mean_orthogonal(prior: PriorSpec, fit: OlsFit, n: int, tau: float) -> np.ndarray:
    """Coordinate-wise posterior means ``(1 - E(s_i|Y)) beta_hat_i``.

    Uses the OLS plug-in ``fit.sigma2_hat`` for the noise variance.
    """
    if not fit.is_orthogonal:
        raise InvalidArgumentError("posterior_mean_orthogonal needs an orthogonal design; "
                                   "use the Gibbs engine for general designs")
    out = np.zeros_like(fit.beta_hat)
    for i, bh in enumerate(fit.beta_hat):
        if bh == 0.0:
            continue
        res = expected_shrinkage(ShrinkageQuery(prior, n, tau, float(bh), fit.sigma2_hat))
        out[i] = res.complement * bh
    return out


def de_shrinkage_closed_form(b: float, n: int, tau: float, beta_hat: float,
                             sigma2: float) -> float:
    """``E(s | Y)`` for the double-exponential prior in closed form.

    With ``pi(gamma) = exp(-b gamma)`` the posterior of ``s`` is proportional
    to ``s^{-3/2} exp(-kappa s - b/(n tau s))`` on (0, 1); both moments are
    truncated inverse-Gaussian integrals, giving::

        E(s|Y) = mu * (Phi(b_n) - e^{c_n} Phi(-d_n)) / (Phi(b_n) + e^{c_n} Phi(-d_n))

    with ``mu = sqrt(2b) sigma / (n sqrt(tau) |beta_hat|)``. The ratio is
    evaluated as ``mu * tanh((log A - log B) / 2)`` with
    ``log B = c_n + log Phi(-d_n)``, which never overflows.
    """
    if beta_hat == 0:
        raise InvalidArgumentError("closed form needs beta_hat != 0; use expected_shrinkage")
    if b <= 0 or n < 1 or tau <= 0 or sigma2 <= 0:
        raise InvalidArgumentError("b, n, tau, sigma2 must be positive")
    sigma = math.sqrt(sigma2)
    abs_b = abs(beta_hat)
    root = math.sqrt(2.0 * b / (n * tau))
    ratio = n * math.sqrt(tau) * abs_b / (math.sqrt(2.0 * b) * sigma)
    b_n = root * (ratio - 1.0)
    d_n = root * (ratio + 1.0)
    c_n = 2.0 * math.sqrt(2.0 * b) * abs_b / (math.sqrt(tau) * sigma)
    log_a = float(log_ndtr(b_n))
    log_b = c_n + float(log_ndtr(-d_n))
    mu = 1.0 / ratio
    return float(mu * math.tanh(0.5 * (log_a - log_b)))


def ig_cdf(x: float, mu: float, lam: float) -> float:
    """Inverse-Gaussian CDF.

    ``Phi(sqrt(lam/x)(x/mu - 1)) + e^{2 lam/mu} Phi(-sqrt(lam/x)(x/mu + 1))``.
    """
    if not (x > 0 and mu > 0 and lam > 0):
        raise DomainError("ig_cdf needs positive x, mu, lam")
    r = math.sqrt(lam / x)
    first = float(ndtr(r * (x / mu - 1.0)))
    second = math.exp(2.0 * lam / mu + float(log_ndtr(-r * (x / mu + 1.0))))
    return min(max(first + second, 0.0), 1.0)


def ig_pdf(x, mu, lam):
    x = np.asarray(x, dtype=float)
    norm = np.sqrt(lam / (2.0 * np.pi * x ** 3))
    return norm * np.exp(-lam * (x - mu) ** 2 / (2.0 * mu ** 2 * x))


class McEstimate(NamedTuple):
    estimate: float
    std_error: float


def _scipy_prior(prior: PriorSpec):
    # normalized densities from scipy, independent of priors.py
    v, par = prior.variant, prior.params
    if v == "de":
        return stats.expon(scale=1.0 / par["b"])
    if v == "student-t":
        return stats.invgamma(par["a"], scale=par["a"])
    if v == "horseshoe":
        return stats.betaprime(0.5, 0.5)
    if v == "tpbn":
        return stats.betaprime(par["u"], par["a"])
    if v == "neg":
        return stats.betaprime(1.0, par["a"])
    raise UnsupportedOperationError(f"no oracle for prior {v!r}")


_T_DF = 3.0
_T_SCALE = 3.0


def mc_shrinkage_oracle(q: ShrinkageQuery, draws: int, rng: np.random.Generator,
                        proposal: str = "prior", chunk: int = 1_000_000) -> McEstimate:
    """Monte-Carlo estimate of ``E(1 - s | Y)`` with a delta-method standard error.

    ``proposal="prior"`` draws ``gamma`` from the prior and weights by the
    marginal likelihood of ``beta_hat``. When the data sit far in the prior
    tail those weights degenerate; ``proposal="defensive"`` then splits the
    draws between the prior and a Student-t on ``log gamma`` centred where
    the likelihood peaks, weighting with the mixture density (the prior's
    normalized density comes from scipy).
    """
    if draws < 2:
        raise InvalidArgumentError("need at least two draws")
    if proposal not in ("prior", "defensive"):
        raise InvalidArgumentError(f"unknown proposal {proposal!r}")
    if proposal == "defensive":
        ref = _scipy_prior(q.prior)
    elif q.prior.variant not in ("de", "student-t", "horseshoe", "tpbn", "neg"):
        raise UnsupportedOperationError(f"no sampler for prior {q.prior.variant!r}")

    ntau = q.n * q.tau
    kappa = q.kappa
    n_prior = draws if proposal == "prior" else draws // 2
    n_t = draws - n_prior
    center = math.log(max(q.beta_hat ** 2 / q.sigma2 - 1.0 / q.n, 1.0 / q.n) / q.tau)

    # running sums, all relative to a common shift
    shift = -np.inf
    sums = np.zeros(5)  # w, w h, w^2, w^2 h, w^2 h^2

    def accumulate(gamma, log_ratio):
        nonlocal shift, sums
        x = ntau * gamma
        h = x / (1.0 + x)
        logw = log_ratio - 0.5 * np.log1p(x) + kappa * h
        m = float(np.max(logw))
        if m > shift:
            if np.isfinite(shift):
                d = math.exp(shift - m)
                sums *= np.array([d, d, d * d, d * d, d * d])
            shift = m
        w = np.exp(logw - shift)
        w2 = w * w
        sums += np.array([w.sum(), (w * h).sum(), w2.sum(), (w2 * h).sum(), (w2 * h * h).sum()])

    frac_prior = n_prior / draws
    frac_t = n_t / draws
    t_dist = stats.t(_T_DF)

    def log_ratio_mixture(gamma):
        if proposal == "prior":
            return np.zeros_like(gamma)
        lg = np.log(gamma)
        logp = ref.logpdf(gamma)
        logg = t_dist.logpdf((lg - center) / _T_SCALE) - math.log(_T_SCALE) - lg
        logq = np.logaddexp(math.log(frac_prior) + logp if frac_prior > 0 else -np.inf,
                            math.log(frac_t) + logg if frac_t > 0 else -np.inf)
        return logp - logq

    for count, source in ((n_prior, "prior"), (n_t, "t")):
        remaining = count
        while remaining > 0:
            m = min(chunk, remaining)
            remaining -= m
            if source == "prior":
                gamma = np.asarray(sample_gamma(q.prior, rng, size=m), dtype=float)
            else:
                with np.errstate(over="ignore"):  # clipped below
                    gamma = np.exp(center + _T_SCALE * rng.standard_t(_T_DF, size=m))
            gamma = np.clip(gamma, 1e-300, 1e300)
            accumulate(gamma, log_ratio_mixture(gamma))

    s_w, s_wh, s_ww, s_wwh, s_wwhh = sums
    est = s_wh / s_w
    var_sum = s_wwhh - 2.0 * est * s_wwh + est * est * s_ww
    se = math.sqrt(max(var_sum, 0.0)) / s_w
    return McEstimate(float(est), float(se))
