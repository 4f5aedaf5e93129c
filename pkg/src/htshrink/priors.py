"""Local-parameter priors for scale mixtures of normals.

Every prior is written in terms of the local variance ``gamma`` of
``beta_i | gamma_i ~ N(0, sigma^2 gamma_i tau)``. Densities are
unnormalized; all downstream quantities are ratios of integrals, so the
missing constants cancel.

Internally the densities are evaluated from ``log(gamma)`` so the quadrature
engine can range over many orders of magnitude without overflow.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DomainError, InvalidArgumentError, UnsupportedOperationError

VARIANTS = (
    "de", "half-hyperbolic", "pos-logistic", "student-t", "horseshoe",
    "horseshoe-plus", "neg", "tpbn", "hib",
)

_REQUIRED = {
    "de": ("b",),
    "half-hyperbolic": ("b",),
    "pos-logistic": ("b",),
    "student-t": ("a",),
    "horseshoe": (),
    "horseshoe-plus": (),
    "neg": ("a",),
    "tpbn": ("u", "a"),
    "hib": ("u", "a", "s", "phi"),
}

_DEFAULTS = {"b": 1.0}

SAMPLEABLE = ("de", "student-t", "horseshoe", "neg", "tpbn")


@dataclass(frozen=True)
class TailClass:
    kind: str  # "polynomial" or "exponential"
    exponent_or_rate: float

    def __post_init__(self):
        if self.kind not in ("polynomial", "exponential"):
            raise InvalidArgumentError(f"unknown tail kind {self.kind!r}")
        if not self.exponent_or_rate > 0:
            raise InvalidArgumentError("tail exponent/rate must be positive")


@dataclass(frozen=True)
class PriorSpec:
    """A prior on the local variance. ``params`` holds the hyperparameters."""

    variant: str
    params: dict = field(default_factory=dict)
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidArgumentError(f"unknown prior variant {self.variant!r}")
        params = dict(self.params)
        for key in _REQUIRED[self.variant]:
            if key not in params:
                if key in _DEFAULTS:
                    params[key] = _DEFAULTS[key]
                else:
                    raise InvalidArgumentError(
                        f"prior {self.variant!r} needs hyperparameter {key!r}")
        extra = set(params) - set(_REQUIRED[self.variant])
        if extra:
            raise InvalidArgumentError(
                f"prior {self.variant!r} does not take {sorted(extra)}")
        for key, val in params.items():
            val = float(val)
            if key == "phi" or key == "s":
                ok = np.isfinite(val) and (val > 0 if key == "phi" else val >= 0)
            else:
                ok = np.isfinite(val) and val > 0
            if not ok:
                raise InvalidArgumentError(f"hyperparameter {key}={val} out of range")
            params[key] = val
        object.__setattr__(self, "params", params)

    def __hash__(self):
        return hash((self.variant, tuple(sorted(self.params.items()))))

    def __getitem__(self, key):
        return self.params[key]

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if not self.params:
            return self.variant
        inner = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.variant}({inner})"

    # convenience constructors
    @classmethod
    def double_exponential(cls, b=1.0):
        return cls("de", {"b": b})

    @classmethod
    def half_hyperbolic(cls, b=1.0):
        return cls("half-hyperbolic", {"b": b})

    @classmethod
    def positive_logistic(cls, b=1.0):
        return cls("pos-logistic", {"b": b})

    @classmethod
    def student_t(cls, a):
        return cls("student-t", {"a": a})

    @classmethod
    def horseshoe(cls):
        return cls("horseshoe")

    @classmethod
    def horseshoe_plus(cls):
        return cls("horseshoe-plus")

    @classmethod
    def neg(cls, a):
        return cls("neg", {"a": a})

    @classmethod
    def tpbn(cls, u, a):
        return cls("tpbn", {"u": u, "a": a})

    @classmethod
    def hib(cls, u, a, s, phi):
        return cls("hib", {"u": u, "a": a, "s": s, "phi": phi})


TPBN_HS = PriorSpec("tpbn", {"u": 0.5, "a": 0.5}, name="tpbn-hs")
TPBN_01 = PriorSpec("tpbn", {"u": 0.1, "a": 0.5}, name="tpbn-0.1")
TPBN_NEG = PriorSpec("tpbn", {"u": 1.0, "a": 0.5}, name="tpbn-neg")
DE = PriorSpec("de", {"b": 1.0}, name="de")

PRESETS = {
    "de": DE,
    "tpbn-hs": TPBN_HS,
    "tpbn-0.1": TPBN_01,
    "tpbn-neg": TPBN_NEG,
    "horseshoe": PriorSpec("horseshoe"),
    "student-t": PriorSpec("student-t", {"a": 1.0}, name="student-t"),
}


def parse_prior(text: str) -> PriorSpec:
    """Parse ``"tag"`` or ``"tag:key=value,key=value"`` (presets accepted).

    >>> parse_prior("tpbn:u=0.1,a=0.5").params
    {'u': 0.1, 'a': 0.5}
    """
    text = text.strip()
    tag, _, rest = text.partition(":")
    tag = tag.strip().lower()
    if not rest and tag in PRESETS:
        return PRESETS[tag]
    params = {}
    if rest:
        for item in rest.replace(" ", ",").split(","):
            if not item:
                continue
            key, eq, val = item.partition("=")
            if not eq:
                raise InvalidArgumentError(f"bad hyperparameter {item!r} (want key=value)")
            try:
                params[key.strip()] = float(val)
            except ValueError:
                raise InvalidArgumentError(f"bad hyperparameter value {item!r}") from None
    return PriorSpec(tag, params)


def _check_gamma(gamma):
    g = np.asarray(gamma, dtype=float)
    if np.any(~(g > 0)):
        raise DomainError("gamma must be positive")
    return g


def _log_ratio_log_over_minus_one(lg):
    """log( log(g) / (g - 1) ) from lg = log g; equals 0 at g = 1."""
    lg = np.asarray(lg, dtype=float)
    em1 = np.expm1(lg)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(np.abs(lg) < 1e-8, 1.0 - 0.5 * lg, lg / np.where(em1 == 0, 1.0, em1))
    # for very large lg: lg / expm1(lg) underflows; use log(lg) - lg
    with np.errstate(divide="ignore"):
        out = np.where(lg > 700, np.log(np.maximum(lg, 1.0)) - lg, np.log(r))
    return out


def log_density_log_gamma(prior: PriorSpec, lg):
    """Unnormalized log density of the prior at ``gamma = exp(lg)``."""
    with np.errstate(over="ignore"):
        return _log_density(prior, np.asarray(lg, dtype=float))


def _log_density(prior, lg):
    v, par = prior.variant, prior.params
    g = np.exp(lg)
    if v == "de":
        return -par["b"] * g
    if v == "half-hyperbolic":
        return -par["b"] * np.hypot(1.0, g)
    if v == "pos-logistic":
        bg = par["b"] * g
        return -bg - 2.0 * np.log1p(np.exp(-bg))
    if v == "student-t":
        a = par["a"]
        return -(a + 1.0) * lg - a * np.exp(-lg)
    if v == "horseshoe":
        return -0.5 * lg - np.logaddexp(0.0, lg)
    if v == "horseshoe-plus":
        return -0.5 * lg + _log_ratio_log_over_minus_one(lg)
    if v == "neg":
        return -(1.0 + par["a"]) * np.logaddexp(0.0, lg)
    if v == "tpbn":
        u, a = par["u"], par["a"]
        return (u - 1.0) * lg - (a + u) * np.logaddexp(0.0, lg)
    if v == "hib":
        u, a, s, phi = par["u"], par["a"], par["s"], par["phi"]
        w = expit(-lg)  # 1 / (1 + gamma)
        return ((u - 1.0) * lg - (a + u) * np.logaddexp(0.0, lg) - s * w
                - np.log(phi ** 2 + (1.0 - phi ** 2) * w))
    raise UnsupportedOperationError(v)


def log_slowly_varying_log_gamma(prior: PriorSpec, lg):
    """log L at ``gamma = exp(lg)``."""
    with np.errstate(over="ignore"):
        return _log_slowly_varying(prior, np.asarray(lg, dtype=float))


def _log_slowly_varying(prior, lg):
    v, par = prior.variant, prior.params
    g = np.exp(lg)
    # log(g / (1 + g)) = -log1p(1/g)
    log_frac = -np.logaddexp(0.0, -lg)
    if v == "de":
        return np.zeros_like(lg)
    if v == "half-hyperbolic":
        # b*g - b*sqrt(1+g^2) = -b / (g + sqrt(1+g^2))
        return -par["b"] / (g + np.hypot(1.0, g))
    if v == "pos-logistic":
        return -2.0 * np.log1p(np.exp(-par["b"] * g))
    if v == "student-t":
        return -par["a"] * np.exp(-lg)
    if v == "horseshoe":
        return log_frac
    if v == "horseshoe-plus":
        return lg + _log_ratio_log_over_minus_one(lg)
    if v == "neg":
        return (par["a"] + 1.0) * log_frac
    if v == "tpbn":
        return (par["a"] + par["u"]) * log_frac
    if v == "hib":
        u, a, s, phi = par["u"], par["a"], par["s"], par["phi"]
        w = expit(-lg)
        return (a + u) * log_frac - s * w - np.log(phi ** 2 + (1.0 - phi ** 2) * w)
    raise UnsupportedOperationError(v)


def log_density_unnormalized(prior: PriorSpec, gamma):
    """Log of the unnormalized prior density at ``gamma > 0``."""
    g = _check_gamma(gamma)
    out = log_density_log_gamma(prior, np.log(g))
    return float(out) if out.ndim == 0 else out


def tail_class(prior: PriorSpec) -> TailClass:
    v, par = prior.variant, prior.params
    if v in ("de", "half-hyperbolic", "pos-logistic"):
        return TailClass("exponential", par["b"])
    if v in ("horseshoe", "horseshoe-plus"):
        return TailClass("polynomial", 0.5)
    return TailClass("polynomial", par["a"])


def tail_factor(prior: PriorSpec, gamma):
    """``-(a+1) log gamma`` for polynomial tails, ``-b gamma`` for exponential."""
    g = _check_gamma(gamma)
    tc = tail_class(prior)
    if tc.kind == "polynomial":
        out = -(tc.exponent_or_rate + 1.0) * np.log(g)
    else:
        out = -tc.exponent_or_rate * g
    return float(out) if out.ndim == 0 else out


def slowly_varying_L(prior: PriorSpec, gamma):
    """The slowly varying factor ``L(gamma)`` (up to the same constant as the density)."""
    g = _check_gamma(gamma)
    out = np.exp(log_slowly_varying_log_gamma(prior, np.log(g)))
    return float(out) if out.ndim == 0 else out


def sample_gamma(prior: PriorSpec, rng: np.random.Generator, size=None):
    """Draw from the normalized prior.

    Only variants with a simple generative representation are supported:
    ``de`` (exponential), ``student-t`` (inverse gamma), ``horseshoe``
    (squared half-Cauchy), ``tpbn`` (gamma-gamma mixture) and ``neg``
    (``tpbn`` with ``u = 1``).
    """
    v, par = prior.variant, prior.params
    if v == "de":
        return rng.exponential(1.0 / par["b"], size=size)
    if v == "student-t":
        a = par["a"]
        return a / rng.gamma(a, 1.0, size=size)
    if v == "horseshoe":
        return np.abs(rng.standard_cauchy(size=size)) ** 2
    if v in ("tpbn", "neg"):
        u = par["u"] if v == "tpbn" else 1.0
        lam = rng.gamma(par["a"], 1.0, size=size)
        return rng.gamma(u, 1.0, size=size) / lam
    raise UnsupportedOperationError(f"no sampler for prior {v!r}")
