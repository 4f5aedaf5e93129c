"""Simulation studies: method comparison tables and asymptotic checks.

Every replication ``r`` of a study owns the seed ``base_seed ^ r``; the
streams for data and for each method are spawned from it with fixed
labels, so results do not depend on worker count or execution order.
"""
from __future__ import annotations

import ast
import csv
import json
import math
import operator
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import adaptive_lasso, cv_select_lambda, lasso_cd, lasso_intercept
from .data import (EXAMPLE_BETAS, GaussianDesignSpec, RegressionDataset, generate_dataset,
                   generate_design, ols_fit, orthogonalize, responses_for)
from .errors import HTShrinkError, InvalidArgumentError
from .gibbs import GibbsConfig, gibbs_fit
from .priors import DE, TPBN_01, TPBN_HS, TPBN_NEG, PriorSpec
from .quadrature import (ShrinkageQuery, de_shrinkage_closed_form, expected_shrinkage,
                         mc_shrinkage_oracle, posterior_mean_orthogonal)
from .selection import ht_select, misclassification, model_size, rpe

METHOD_CODES = {"ls": 0, "lasso": 1, "adap-lasso": 2, "de": 3, "tpbn-hs": 4,
                "tpbn-0.1": 5, "tpbn-neg": 6}
BAYES_PRIORS = {"de": DE, "tpbn-hs": TPBN_HS, "tpbn-0.1": TPBN_01, "tpbn-neg": TPBN_NEG}
ALL_METHODS = tuple(METHOD_CODES)

DEFAULT_TEST_SIZE = 200
DEFAULT_REPS = 50
VALIDATION_FRACTION = 0.2
# candidate n*tau values for the validation grid
VALIDATION_NTAU = tuple(10.0 ** k for k in np.linspace(-3.0, 1.0, 5))
CV_FOLDS = 5
THREADS_ENV = "HT_SHRINK_THREADS"

_DATA_STREAM = 0
_METHOD_STREAM = 1


# ---------------------------------------------------------------- schedules

_FUNCS = {"log": math.log, "log10": math.log10, "sqrt": math.sqrt, "exp": math.exp}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _compile_expression(text: str):
    """Arithmetic in ``n`` with log, log10, sqrt, exp; nothing else is allowed."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise InvalidArgumentError(f"bad expression {text!r}: {exc.msg}") from None

    def check(node):
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            check(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            pass
        elif isinstance(node, ast.Name) and node.id == "n":
            pass
        elif (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
              and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            check(node.args[0])
        else:
            raise InvalidArgumentError(f"unsupported element in expression {text!r}")

    check(tree)

    def ev(node, n):
        if isinstance(node, ast.Expression):
            return ev(node.body, n)
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left, n), ev(node.right, n))
        if isinstance(node, ast.UnaryOp):
            return _UNOPS[type(node.op)](ev(node.operand, n))
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return float(n)
        return _FUNCS[node.func.id](ev(node.args[0], n))

    return lambda n: ev(tree, n)


@dataclass(frozen=True)
class ScheduleSpec:
    """A global-scale sequence ``tau_n``.

    ``poly-a``: ``n^(-1-2/a)`` (default a = 0.5). ``exp-default``:
    ``log(log(n)) / n^2``. ``custom``: any arithmetic expression in n.
    """

    name: str
    params: dict = field(default_factory=dict)
    expression: str | None = None

    def __post_init__(self):
        if self.name == "poly-a":
            a = float(self.params.get("a", 0.5))
            if not a > 0:
                raise InvalidArgumentError("poly-a needs a > 0")
            object.__setattr__(self, "params", {"a": a})
        elif self.name == "exp-default":
            if self.params:
                raise InvalidArgumentError("exp-default takes no parameters")
        elif self.name == "custom":
            if not self.expression:
                raise InvalidArgumentError("custom schedule needs an expression")
            _compile_expression(self.expression)
        else:
            raise InvalidArgumentError(f"unknown schedule {self.name!r}")

    def __hash__(self):
        return hash((self.name, tuple(sorted(self.params.items())), self.expression))

    @classmethod
    def parse(cls, text: str) -> "ScheduleSpec":
        """``poly-a``, ``poly-a:a=0.3``, ``exp-default``, ``custom:1/n**2``."""
        text = text.strip()
        name, _, rest = text.partition(":")
        name = name.strip()
        if name == "poly-a-default":
            name = "poly-a"
        if name == "custom":
            return cls("custom", expression=rest.strip())
        params = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, eq, val = item.partition("=")
            if not eq:
                raise InvalidArgumentError(f"bad schedule parameter {item!r}")
            try:
                params[key.strip()] = float(val)
            except ValueError:
                raise InvalidArgumentError(f"bad schedule parameter {item!r}") from None
        return cls(name, params)

    def log_tau(self, n) -> float:
        n = float(n)
        if self.name == "poly-a":
            return -(1.0 + 2.0 / self.params["a"]) * math.log(n)
        if self.name == "exp-default":
            ll = math.log(math.log(n)) if n > math.e else -math.inf
            return math.log(ll) - 2.0 * math.log(n) if ll > 0 else -math.inf
        val = _compile_expression(self.expression)(n)
        return math.log(val) if val > 0 else -math.inf

    def tau(self, n) -> float:
        lt = self.log_tau(n)
        if not np.isfinite(lt):
            raise InvalidArgumentError(f"schedule {self.label} is not positive at n={n}")
        return math.exp(lt)

    @property
    def label(self) -> str:
        if self.name == "custom":
            return f"custom:{self.expression}"
        if self.params:
            return self.name + ":" + ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return self.name


@dataclass(frozen=True)
class TauPolicy:
    """How the Bayesian methods get tau: a fixed value, a schedule in n, or
    a validation grid (candidates ``ntau / n`` scored on a held-out split)."""

    kind: str = "validate"
    value: float | None = None
    schedule: ScheduleSpec | None = None
    ntau_grid: tuple = VALIDATION_NTAU

    def __post_init__(self):
        if self.kind not in ("validate", "fixed", "schedule"):
            raise InvalidArgumentError(f"unknown tau policy {self.kind!r}")
        if self.kind == "fixed" and not (self.value is not None and self.value > 0):
            raise InvalidArgumentError("fixed tau must be positive")
        if self.kind == "schedule" and self.schedule is None:
            raise InvalidArgumentError("schedule policy needs a schedule")

    def candidates(self, n: int) -> tuple:
        if self.kind == "fixed":
            return (float(self.value),)
        if self.kind == "schedule":
            return (self.schedule.tau(n),)
        return tuple(v / n for v in self.ntau_grid)

    def describe(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.value!r}"
        if self.kind == "schedule":
            return f"schedule:{self.schedule.label}"
        return "validate:" + ",".join(repr(v) for v in self.ntau_grid) + "/n"


# ---------------------------------------------------------------- configs

@dataclass(frozen=True)
class ExperimentConfig:
    example: int
    n: int
    sigma: float
    replications: int = DEFAULT_REPS
    methods: tuple = ALL_METHODS
    test_size: int = DEFAULT_TEST_SIZE
    base_seed: int = 0
    tau_policy: TauPolicy = TauPolicy()
    iterations: int = 6000
    burn_in: int = 1000

    def __post_init__(self):
        if self.example not in EXAMPLE_BETAS:
            raise InvalidArgumentError(f"example must be one of {sorted(EXAMPLE_BETAS)}")
        p = len(EXAMPLE_BETAS[self.example])
        if self.n <= p:
            raise InvalidArgumentError(f"n must exceed p={p}")
        if not self.sigma > 0:
            raise InvalidArgumentError("sigma must be positive")
        if self.replications < 1:
            raise InvalidArgumentError("replications must be >= 1")
        methods = tuple(self.methods)
        if not methods:
            raise InvalidArgumentError("methods must be nonempty")
        unknown = [m for m in methods if m not in METHOD_CODES]
        if unknown:
            raise InvalidArgumentError(
                f"unknown methods {unknown}; choose from {list(ALL_METHODS)}")
        object.__setattr__(self, "methods", methods)
        if self.test_size < 1:
            raise InvalidArgumentError("test_size must be >= 1")
        if not 0 <= self.base_seed < 2 ** 64:
            raise InvalidArgumentError("seed must be a 64-bit unsigned integer")
        if self.tau_policy.kind == "schedule":
            self.tau_policy.schedule.tau(self.n)
        # validates chain lengths early
        GibbsConfig(iterations=self.iterations, burn_in=self.burn_in, tau=1.0)

    @property
    def beta(self) -> np.ndarray:
        return np.array(EXAMPLE_BETAS[self.example])


@dataclass(frozen=True)
class MetricsRow:
    example: int
    n: int
    sigma: float
    method: str
    rpe_median: float
    misclass_mean: float
    model_size_mean: float
    replications: int


@dataclass(frozen=True)
class ReplicationRecord:
    rep: int
    seed: int
    method: str
    rpe: float
    misclass: float
    model_size: int
    selected: tuple  # 0-based
    tau: float | None = None
    lam: float | None = None


class ReplicationFailure(HTShrinkError, RuntimeError):
    def __init__(self, message, seed, method):
        super().__init__(message)
        self.seed = seed
        self.method = method


def _parse_value_list(text, conv):
    return [conv(v) for v in text.replace(";", ",").split(",") if v.strip()]


def parse_config_text(text: str) -> list:
    """Flat ``key = value`` lines -> one :class:`ExperimentConfig` per (n, sigma).

    Keys: example, n, sigma, reps, methods, test_size, seed, tau or
    tau_schedule, iterations, burn_in. ``n`` and ``sigma`` may be comma
    lists, which expand to every combination. ``#`` starts a comment.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        if not eq:
            key, _, val = line.partition(":")
            if not _:
                raise InvalidArgumentError(f"line {lineno}: expected key = value")
        key = key.strip().lower().replace("-", "_")
        if key in values:
            raise InvalidArgumentError(f"line {lineno}: duplicate key {key!r}")
        values[key] = val.strip()

    allowed = {"example", "n", "sigma", "reps", "replications", "methods", "test_size", "seed",
               "tau", "tau_schedule", "iterations", "burn_in"}
    extra = set(values) - allowed
    if extra:
        raise InvalidArgumentError(f"unknown config keys {sorted(extra)}")
    for key in ("example", "n", "sigma"):
        if key not in values:
            raise InvalidArgumentError(f"config is missing {key!r}")
    if "tau" in values and "tau_schedule" in values:
        raise InvalidArgumentError("give tau or tau_schedule, not both")
    try:
        example = int(values["example"])
        ns = _parse_value_list(values["n"], int)
        sigmas = _parse_value_list(values["sigma"], float)
        reps = int(values.get("reps", values.get("replications", DEFAULT_REPS)))
        methods = tuple(m.strip().lower() for m in values.get("methods", ",".join(ALL_METHODS))
                        .split(",") if m.strip())
        test_size = int(values.get("test_size", DEFAULT_TEST_SIZE))
        seed = int(values.get("seed", 0))
        iterations = int(values.get("iterations", 6000))
        burn_in = int(values.get("burn_in", min(1000, iterations // 5)))
    except ValueError as exc:
        raise InvalidArgumentError(f"bad config value: {exc}") from None
    if "tau" in values:
        try:
            policy = TauPolicy("fixed", value=float(values["tau"]))
        except ValueError:
            raise InvalidArgumentError(f"bad tau {values['tau']!r}") from None
    elif "tau_schedule" in values:
        policy = TauPolicy("schedule", schedule=ScheduleSpec.parse(values["tau_schedule"]))
    else:
        policy = TauPolicy()
    if not ns or not sigmas:
        raise InvalidArgumentError("n and sigma need at least one value")
    return [ExperimentConfig(example=example, n=n, sigma=s, replications=reps, methods=methods,
                             test_size=test_size, base_seed=seed, tau_policy=policy,
                             iterations=iterations, burn_in=burn_in)
            for n in ns for s in sigmas]


def load_config(path) -> list:
    return parse_config_text(Path(path).read_text())


# ---------------------------------------------------------------- one replication

def _stream(seed, *labels) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *labels]))


def _chain_seed(rng) -> int:
    return int(rng.integers(0, 2 ** 63))


def gibbs_posterior_mean(data, prior, tau, rng, iterations=6000, burn_in=1000):
    cfg = GibbsConfig(iterations=iterations, burn_in=burn_in, tau=tau, seed=_chain_seed(rng))
    return gibbs_fit(data, prior, cfg).beta_draws.mean(axis=0)


def choose_tau(train: RegressionDataset, prior: PriorSpec, policy: TauPolicy, rng,
               iterations=6000, burn_in=1000):
    """Pick tau from the policy's candidates by HT prediction error on a held-out split."""
    cands = policy.candidates(train.n)
    if len(cands) == 1:
        return cands[0]
    perm = rng.permutation(train.n)
    n_val = max(1, int(round(VALIDATION_FRACTION * train.n)))
    val, fit_rows = perm[:n_val], perm[n_val:]
    if fit_rows.size <= train.p:
        raise InvalidArgumentError("validation split leaves too few rows for OLS")
    sub = train.subset(fit_rows)
    held = train.subset(val)
    ols_sub = ols_fit(sub).beta_hat
    errs = []
    for tau in cands:
        pm = gibbs_posterior_mean(sub, prior, tau, rng, iterations, burn_in)
        ht = ht_select(pm, ols_sub).ht_estimates
        errs.append(float(np.mean((held.Y - held.X @ ht) ** 2)))
    return cands[int(np.argmin(errs))]


def _fit_method(method, train, config, rng):
    """Returns (coefficients, intercept, selected, tau, lam)."""
    if method == "ls":
        beta = ols_fit(train).beta_hat
        return beta, 0.0, tuple(range(train.p)), None, None
    if method == "lasso":
        lam = cv_select_lambda(train, CV_FOLDS, rng=rng)
        beta = lasso_cd(train, lam)
        return beta, lasso_intercept(train, beta), tuple(np.flatnonzero(beta)), None, lam
    if method == "adap-lasso":
        beta = adaptive_lasso(train, rng=rng, folds=CV_FOLDS)
        return beta, lasso_intercept(train, beta), tuple(np.flatnonzero(beta)), None, None
    prior = BAYES_PRIORS[method]
    tau = choose_tau(train, prior, config.tau_policy, rng, config.iterations, config.burn_in)
    pm = gibbs_posterior_mean(train, prior, tau, rng, config.iterations, config.burn_in)
    sel = ht_select(pm, ols_fit(train).beta_hat)
    return sel.ht_estimates, 0.0, sel.selected, tau, None


def run_replication(config: ExperimentConfig, r: int) -> list:
    seed = config.base_seed ^ r
    data_rng = _stream(seed, _DATA_STREAM)
    beta = config.beta
    p = beta.size
    train = generate_dataset(GaussianDesignSpec(config.n, p), beta, config.sigma, data_rng)
    test = generate_dataset(GaussianDesignSpec(config.test_size, p), beta, config.sigma, data_rng)
    support = train.true_support
    out = []
    for method in config.methods:
        rng = _stream(seed, _METHOD_STREAM, METHOD_CODES[method])
        try:
            coef, icpt, selected, tau, lam = _fit_method(method, train, config, rng)
        except HTShrinkError as exc:
            raise ReplicationFailure(
                f"replication {r} (seed {seed}) failed for method {method}: {exc}",
                seed, method) from exc
        selected = tuple(int(i) for i in selected)
        out.append(ReplicationRecord(
            rep=r, seed=seed, method=method,
            rpe=rpe(coef, test, config.sigma ** 2, intercept=icpt),
            misclass=misclassification(selected, support, p),
            model_size=model_size(selected), selected=selected, tau=tau, lam=lam))
    return out


def worker_count(jobs: int) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise InvalidArgumentError(f"{THREADS_ENV} must be an integer") from None
        if cap < 1:
            raise InvalidArgumentError(f"{THREADS_ENV} must be >= 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, jobs))


def _map_ordered(fn, args_list, workers):
    if workers == 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *a) for a in args_list]
        return [f.result() for f in futures]


def aggregate(config: ExperimentConfig, records) -> list:
    rows = []
    for method in config.methods:
        recs = [rec for rec in records if rec.method == method]
        rows.append(MetricsRow(
            example=config.example, n=config.n, sigma=config.sigma, method=method,
            rpe_median=float(np.median([rec.rpe for rec in recs])),
            misclass_mean=float(np.mean([rec.misclass for rec in recs])),
            model_size_mean=float(np.mean([rec.model_size for rec in recs])),
            replications=len(recs)))
    return rows


@dataclass(frozen=True)
class CellResult:
    config: ExperimentConfig
    rows: list
    records: list


def simulate_cell(config: ExperimentConfig, workers: int | None = None) -> CellResult:
    if workers is None:
        workers = worker_count(config.replications)
    per_rep = _map_ordered(run_replication, [(config, r) for r in range(config.replications)],
                           workers)
    records = [rec for recs in per_rep for rec in recs]
    return CellResult(config, aggregate(config, records), records)


def run_simulation_study(config: ExperimentConfig, workers: int | None = None) -> list:
    """Aggregated metrics, one row per method."""
    return simulate_cell(config, workers).rows


# ---------------------------------------------------------------- output

METRICS_HEADER = ("example", "n", "sigma", "method", "rpe_median", "misclass_mean",
                  "model_size_mean", "replications")
RECORDS_HEADER = ("rep", "seed", "method", "rpe", "misclass", "model_size", "selected_indices")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for row in rows:
            w.writerow([_fmt(getattr(row, k)) for k in METRICS_HEADER])


def write_records_csv(records, path):
    """Per-replication records; selected indices are 1-based, space separated."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORDS_HEADER)
        for rec in records:
            w.writerow([rec.rep, rec.seed, rec.method, _fmt(rec.rpe), _fmt(rec.misclass),
                        rec.model_size, " ".join(str(i + 1) for i in rec.selected)])


def read_records_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            sel = tuple(int(t) - 1 for t in row["selected_indices"].split())
            out.append(ReplicationRecord(int(row["rep"]), int(row["seed"]), row["method"],
                                         float(row["rpe"]), float(row["misclass"]),
                                         int(row["model_size"]), sel))
    return out


def cell_metadata(cell: CellResult) -> dict:
    cfg = cell.config
    meta = {
        "example": cfg.example, "n": cfg.n, "sigma": cfg.sigma,
        "replications": cfg.replications, "methods": list(cfg.methods),
        "test_size": cfg.test_size, "base_seed": cfg.base_seed,
        "tau_policy": cfg.tau_policy.describe(),
        "iterations": cfg.iterations, "burn_in": cfg.burn_in,
        "validation_fraction": VALIDATION_FRACTION, "cv_folds": CV_FOLDS,
        "chosen_tau": {}, "chosen_lambda": {},
    }
    for rec in cell.records:
        if rec.tau is not None:
            meta["chosen_tau"].setdefault(rec.method, []).append(rec.tau)
        if rec.lam is not None:
            meta["chosen_lambda"].setdefault(rec.method, []).append(rec.lam)
    return meta


def write_metadata_json(cells, path):
    with open(path, "w") as fh:
        json.dump([cell_metadata(c) for c in cells], fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- asymptotic studies

@dataclass(frozen=True)
class ConsistencyRow:
    n: int
    tau: float
    proportion: float
    replications: int
    regime_violated: bool  # n * tau >= 1


def _orthogonal_example(n, beta, sigma, rng):
    X = generate_design(GaussianDesignSpec(n, beta.size), rng)
    X = orthogonalize(RegressionDataset(X, np.zeros(n))).X
    Y = responses_for(X, beta, sigma, rng)
    return RegressionDataset(X, Y, beta_true=beta, sigma_true=sigma)


def _consistency_rep(prior, n, tau, beta, sigma, seed):
    rng = _stream(seed, n)
    ds = _orthogonal_example(n, beta, sigma, rng)
    fit = ols_fit(ds)
    pm = posterior_mean_orthogonal(prior, fit, n, tau)
    sel = ht_select(pm, fit.beta_hat)
    return set(sel.selected) == set(ds.true_support.tolist())


def run_consistency_study(prior: PriorSpec, schedule: ScheduleSpec, n_grid, replications: int,
                          base_seed: int = 0, sigma: float = 1.0, beta=None,
                          workers: int | None = None) -> list:
    """Proportion of replications whose HT selection equals the true support.

    Designs are orthogonalized so the exact quadrature posterior applies;
    the noise variance is the OLS plug-in.
    """
    if replications < 1:
        raise InvalidArgumentError("replications must be >= 1")
    beta = np.array(EXAMPLE_BETAS[1] if beta is None else beta, dtype=float)
    rows = []
    for n in n_grid:
        n = int(n)
        tau = schedule.tau(n)
        violated = n * tau >= 1.0
        if violated:
            warnings.warn(f"n*tau = {n * tau:g} >= 1 at n={n}; outside the consistency regime",
                          stacklevel=2)
        args = [(prior, n, tau, beta, sigma, base_seed ^ r) for r in range(replications)]
        hits = _map_ordered(_consistency_rep, args,
                            workers if workers is not None else worker_count(replications))
        rows.append(ConsistencyRow(n, tau, float(np.mean(hits)), replications, violated))
    return rows


@dataclass(frozen=True)
class RateRow:
    n: int
    tau: float
    mean_scaled: float  # mean of n sqrt(tau) (beta_ht - beta0)
    sd_scaled: float
    mean_root_n: float  # mean of sqrt(n) (beta_ht - beta0)
    sd_root_n: float
    selected_fraction: float
    replications: int


def _rate_rep(b, n, tau, beta0, sigma, seed):
    rng = _stream(seed, n)
    ds = _orthogonal_example(n, np.array([beta0]), sigma, rng)
    fit = ols_fit(ds)
    bh = float(fit.beta_hat[0])
    es = de_shrinkage_closed_form(b, n, tau, bh, fit.sigma2_hat)
    sel = ht_select(np.array([(1.0 - es) * bh]), np.array([bh]))
    return float(sel.ht_estimates[0]) - beta0, bool(sel.selected)


def run_rate_study(b: float, schedule: ScheduleSpec, n_grid, replications: int,
                   base_seed: int = 0, beta0: float = 2.0, sigma: float = 1.0,
                   workers: int | None = None) -> list:
    """Distribution of the HT estimation error under the double-exponential prior."""
    if replications < 2:
        raise InvalidArgumentError("replications must be >= 2")
    rows = []
    for n in n_grid:
        n = int(n)
        tau = schedule.tau(n)
        args = [(b, n, tau, beta0, sigma, base_seed ^ r) for r in range(replications)]
        res = _map_ordered(_rate_rep, args,
                           workers if workers is not None else worker_count(replications))
        err = np.array([e for e, _ in res])
        scaled = n * math.sqrt(tau) * err
        root = math.sqrt(n) * err
        rows.append(RateRow(n, tau, float(scaled.mean()), float(scaled.std(ddof=1)),
                            float(root.mean()), float(root.std(ddof=1)),
                            float(np.mean([s for _, s in res])), replications))
    return rows


@dataclass(frozen=True)
class PolyADiagnostic:
    n_grid: tuple
    size_term: tuple  # p_n (n tau_n)^epsilon
    log_term: tuple  # log(tau_n) / sqrt(n)
    size_term_decreasing: bool
    log_term_decreasing: bool

    @property
    def satisfied(self) -> bool:
        return self.size_term_decreasing and self.log_term_decreasing


def _shrinking(values, rtol=1e-9):
    mags = np.abs(np.asarray(values, dtype=float))
    return bool(np.all(np.isfinite(mags)) and np.all(mags[1:] < mags[:-1] * (1.0 - rtol)))


def poly_a_diagnostic(schedule: ScheduleSpec, a: float, p_schedule: str, epsilon: float,
                      n_grid) -> PolyADiagnostic:
    """Numerical trend check of ``p_n (n tau_n)^eps -> 0`` and ``log(tau_n)/sqrt(n) -> 0``.

    Each sequence passes when its magnitude strictly decreases along the
    grid. Computed in logs so tiny tau values do not underflow.
    """
    if not 0 < a < 1:
        raise InvalidArgumentError("a must lie in (0, 1)")
    if not 0 < epsilon < a:
        raise InvalidArgumentError("epsilon must lie in (0, a)")
    p_fn = _compile_expression(p_schedule)
    ns = tuple(int(n) for n in n_grid)
    size_term, log_term = [], []
    for n in ns:
        lt = schedule.log_tau(n)
        pn = p_fn(n)
        size_term.append(pn * math.exp(epsilon * (math.log(n) + lt)))
        log_term.append(lt / math.sqrt(n))
    return PolyADiagnostic(ns, tuple(size_term), tuple(log_term),
                           _shrinking(size_term), _shrinking(log_term))


@dataclass(frozen=True)
class OracleRow:
    tau: float
    beta_hat: float
    quadrature: float  # E(1 - s | Y)
    closed_form: float | None
    monte_carlo: float
    mc_std_error: float
    rel_diff_closed_form: float | None
    z_quadrature: float
    z_closed_form: float | None

    def passes(self, rtol=1e-6, z_max=3.0) -> bool:
        ok = abs(self.z_quadrature) <= z_max
        if self.closed_form is not None:
            ok = ok and self.rel_diff_closed_form <= rtol and abs(self.z_closed_form) <= z_max
        return ok


def oracle_check(prior: PriorSpec, n: int, tau_grid, beta_grid, sigma2: float = 1.0,
                 draws: int = 10_000_000, base_seed: int = 0,
                 proposal: str = "defensive") -> list:
    """Quadrature, closed form (double-exponential only) and Monte Carlo side by side.

    All three report ``E(1 - s | Y)``; the closed form is converted from
    ``E(s | Y)`` and its relative gap is measured on ``E(s | Y)``.
    """
    rows = []
    for i, tau in enumerate(tau_grid):
        for j, bh in enumerate(beta_grid):
            q = ShrinkageQuery(prior, n, float(tau), float(bh), sigma2)
            quad = expected_shrinkage(q)
            mc = mc_shrinkage_oracle(q, draws, _stream(base_seed, i, j), proposal=proposal)
            cf = rel = zc = None
            if prior.variant == "de" and bh != 0:
                es = de_shrinkage_closed_form(prior["b"], n, float(tau), float(bh), sigma2)
                rel = abs(quad.expected_shrinkage - es) / es
                cf = 1.0 - es
                zc = (mc.estimate - cf) / mc.std_error
            rows.append(OracleRow(float(tau), float(bh), quad.complement, cf, mc.estimate,
                                  mc.std_error, rel, (mc.estimate - quad.complement) / mc.std_error,
                                  zc))
    return rows


def write_rows_csv(rows, path):
    """CSV for any list of flat dataclass rows."""
    rows = list(rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not rows:
            return
        keys = list(asdict(rows[0]))
        w.writerow(keys)
        for row in rows:
            w.writerow([_fmt(v) for v in asdict(row).values()])


__all__ = [
    "ExperimentConfig", "MetricsRow", "ScheduleSpec", "TauPolicy", "ReplicationRecord",
    "ReplicationFailure", "CellResult", "ConsistencyRow", "RateRow", "PolyADiagnostic",
    "parse_config_text", "load_config", "run_replication", "simulate_cell",
    "run_simulation_study", "run_consistency_study", "run_rate_study", "oracle_check",
    "OracleRow", "poly_a_diagnostic",
    "write_metrics_csv", "write_records_csv", "read_records_csv", "write_metadata_json",
    "write_rows_csv", "choose_tau", "gibbs_posterior_mean", "aggregate", "worker_count",
]
