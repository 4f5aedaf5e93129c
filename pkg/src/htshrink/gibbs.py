"""Gibbs sampling for general designs under normal scale-mixture priors."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import RegressionDataset
from .errors import DomainError, InvalidArgumentError, NumericalFailure, UnsupportedOperationError
from .priors import PriorSpec

DEFAULT_ITERATIONS = 6000
DEFAULT_BURN_IN = 1000
MIN_KEPT = 100
GRID_POINTS = 25


@dataclass(frozen=True)
class GibbsConfig:
    """Chain settings.

    Exactly one of ``tau`` (fixed global scale) or ``tau_grid`` (uniform
    prior over the listed values) is set. ``sigma2_fixed`` pins the noise
    variance instead of sampling it.
    """

    iterations: int = DEFAULT_ITERATIONS
    burn_in: int = DEFAULT_BURN_IN
    thin: int = 1
    seed: int = 0
    tau: float | None = None
    tau_grid: tuple | None = None
    sigma2_fixed: float | None = None

    def __post_init__(self):
        if self.iterations < 1 or self.burn_in < 0 or self.burn_in >= self.iterations:
            raise InvalidArgumentError("need iterations >= 1 and 0 <= burn_in < iterations")
        if self.thin < 1:
            raise InvalidArgumentError("thin must be >= 1")
        if (self.iterations - self.burn_in) / self.thin < MIN_KEPT:
            raise InvalidArgumentError(f"chain keeps fewer than {MIN_KEPT} draws")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidArgumentError("seed must be a 64-bit unsigned integer")
        if (self.tau is None) == (self.tau_grid is None):
            raise InvalidArgumentError("set exactly one of tau or tau_grid")
        if self.tau is not None and not (self.tau > 0 and np.isfinite(self.tau)):
            raise InvalidArgumentError("tau must be positive")
        if self.tau_grid is not None:
            grid = tuple(float(t) for t in self.tau_grid)
            if not grid or any(not (t > 0 and np.isfinite(t)) for t in grid):
                raise InvalidArgumentError("tau grid must hold positive values")
            object.__setattr__(self, "tau_grid", grid)
        if self.sigma2_fixed is not None and not self.sigma2_fixed > 0:
            raise InvalidArgumentError("sigma2_fixed must be positive")

    @classmethod
    def grid(cls, tau_lo, tau_hi, points=GRID_POINTS, **kw):
        """Log-uniform grid of ``points`` values between the two endpoints."""
        if not 0 < tau_lo < tau_hi:
            raise InvalidArgumentError("need 0 < tau_lo < tau_hi")
        return cls(tau_grid=tuple(np.geomspace(tau_lo, tau_hi, points)), **kw)

    @property
    def kept(self) -> int:
        return -(-(self.iterations - self.burn_in) // self.thin)


@dataclass(frozen=True)
class PosteriorDraws:
    beta_draws: np.ndarray  # (kept, p)
    sigma2_draws: np.ndarray
    gamma_draws: np.ndarray  # (kept, p)
    tau_draws: np.ndarray

    def to_csv(self, path):
        """One row per kept iteration."""
        k, p = self.beta_draws.shape
        header = (["draw", "tau", "sigma2"] + [f"beta{j + 1}" for j in range(p)]
                  + [f"gamma{j + 1}" for j in range(p)])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(k):
                row = [self.tau_draws[i], self.sigma2_draws[i], *self.beta_draws[i],
                       *self.gamma_draws[i]]
                w.writerow([i] + [f"{v:.17g}" for v in row])


@dataclass(frozen=True)
class PosteriorSummary:
    beta_pm: np.ndarray
    mcse: np.ndarray
    ess: np.ndarray


def _prior_code(prior: PriorSpec):
    v, par = prior.variant, prior.params
    if v == "de":
        return _kernels.PRIOR_DE, par["b"], 0.0
    if v == "tpbn":
        return _kernels.PRIOR_TPBN, par["u"], par["a"]
    if v == "horseshoe":
        return _kernels.PRIOR_TPBN, 0.5, 0.5
    if v == "neg":
        return _kernels.PRIOR_TPBN, 1.0, par["a"]
    if v == "student-t":
        return _kernels.PRIOR_STUDENT_T, par["a"], 0.0
    raise UnsupportedOperationError(f"no Gibbs sampler for prior {v!r}")


def _kernel_seed(seed: int) -> int:
    # numba's generator takes a 32-bit seed; mix all 64 bits into it
    return int(np.random.SeedSequence(seed).generate_state(1, dtype=np.uint32)[0])


def gibbs_fit(dataset: RegressionDataset, prior: PriorSpec, config: GibbsConfig) -> PosteriorDraws:
    """Run one chain. Bit-identical for identical inputs."""
    code, h1, h2 = _prior_code(prior)
    X = np.ascontiguousarray(dataset.X, dtype=float)
    Y = np.ascontiguousarray(dataset.Y, dtype=float)
    n, p = X.shape
    if n <= p:
        raise InvalidArgumentError("Gibbs engine needs n > p")
    XtX = X.T @ X
    XtY = X.T @ Y
    beta0, *_ = np.linalg.lstsq(X, Y, rcond=None)
    resid = Y - X @ beta0
    sigma2_0 = max(float(resid @ resid) / (n - p), 1e-8 * max(float(Y @ Y) / n, 1.0))
    grid = np.array([config.tau] if config.tau is not None else config.tau_grid, dtype=float)
    s2fix = config.sigma2_fixed if config.sigma2_fixed is not None else -1.0

    status, failed_at, beta, sigma2, gamma, tau = _kernels.run_chain(
        X, Y, XtX, XtY, code, float(h1), float(h2), grid, float(s2fix),
        beta0, sigma2_0, config.iterations, config.burn_in, config.thin,
        _kernel_seed(config.seed))
    if status != _kernels.STATUS_OK:
        raise NumericalFailure(f"non-finite Gibbs state at iteration {failed_at}")
    return PosteriorDraws(beta, sigma2, gamma, tau)


def sample_gig(p_param: float, a_param: float, b_param: float, rng: np.random.Generator,
               size=None):
    """Draws from GIG(p, a, b), density prop. to ``x^(p-1) exp(-(a x + b/x)/2)``.

    ``b = 0`` needs ``p > 0`` (gamma limit); ``a = 0`` needs ``p < 0``.
    """
    if not (np.isfinite(p_param) and a_param >= 0 and b_param >= 0):
        raise DomainError("GIG needs finite p and nonnegative a, b")
    if (b_param == 0 and not (a_param > 0 and p_param > 0)) or \
            (a_param == 0 and not (b_param > 0 and p_param < 0)):
        raise DomainError("degenerate GIG parameters")
    m = 1 if size is None else int(np.prod(size))
    seed = int(rng.integers(0, 2 ** 32))
    out = _kernels.gig_batch(float(p_param), float(a_param), float(b_param), m, seed)
    return float(out[0]) if size is None else out.reshape(size)


def _autocov(x):
    n = x.size
    xc = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    return np.fft.irfft(f * np.conj(f), m)[:n] / n


def effective_sample_size(x) -> float:
    """ESS by Geyer's initial monotone positive sequence."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        raise InvalidArgumentError("need at least four draws")
    acov = _autocov(x)
    if acov[0] <= 0 or not np.isfinite(acov[0]):
        return float(n)
    rho = acov / acov[0]
    # pair sums Gamma_m = rho_{2m} + rho_{2m+1}, truncated at the first nonpositive one
    npairs = (n - 1) // 2
    pairs = rho[0:2 * npairs:2] + rho[1:2 * npairs:2]
    stop = np.flatnonzero(pairs <= 0)
    pairs = pairs[:stop[0]] if stop.size else pairs
    pairs = np.minimum.accumulate(pairs)
    tau_int = -1.0 + 2.0 * pairs.sum()
    return float(n / max(tau_int, 1.0 / np.log10(n)))


def summarize(draws: PosteriorDraws) -> PosteriorSummary:
    b = draws.beta_draws
    if b.shape[0] < MIN_KEPT:
        raise InvalidArgumentError(f"need at least {MIN_KEPT} draws to summarize")
    pm = b.mean(axis=0)
    ess = np.array([effective_sample_size(col) for col in b.T])
    sd = b.std(axis=0, ddof=1)
    mcse = sd / np.sqrt(ess)
    return PosteriorSummary(beta_pm=pm, mcse=mcse, ess=ess)
