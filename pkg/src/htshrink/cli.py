"""Command line entry point: ``htshrink {simulate,fit,asymptotics,oracle-check}``.

Exit status is 0 on success, 1 on usage or configuration errors and 2 on
numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import harness
from .baselines import adaptive_lasso, cv_select_lambda, lasso_cd, lasso_intercept
from .data import ols_fit, read_csv
from .errors import HTShrinkError, NumericalFailure
from .priors import parse_prior
from .quadrature import posterior_mean_orthogonal
from .selection import ht_select

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage, which we reserve for numerical failure
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _int_list(text):
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma list of integers: {text!r}") from None


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="htshrink", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run simulation cells from a config file")
    sim.add_argument("--config", required=True, type=Path)
    sim.add_argument("--out", required=True, type=Path, help="aggregated metrics CSV")
    sim.add_argument("--records", type=Path,
                     help="per-replication CSV (default: <out stem>.records.csv)")
    sim.add_argument("--metadata", type=Path, help="JSON sidecar (default: <out stem>.meta.json)")
    sim.add_argument("--reps", type=int, help="override the replication count")
    sim.add_argument("--workers", type=int, help="worker processes (default: HT_SHRINK_THREADS)")

    fit = sub.add_parser("fit", help="fit one method to a CSV dataset")
    fit.add_argument("--data", required=True, type=Path)
    fit.add_argument("--method", required=True,
                     help="ls, lasso, adap-lasso, de, tpbn-hs, tpbn-0.1, tpbn-neg, or a prior "
                          "tag such as 'tpbn:u=0.2,a=0.5'")
    fit.add_argument("--tau", type=float, help="global scale (default: validation grid)")
    fit.add_argument("--engine", choices=("auto", "gibbs", "quadrature"), default="auto",
                     help="auto uses exact quadrature when the design is orthogonal")
    fit.add_argument("--iterations", type=int, default=6000)
    fit.add_argument("--burn-in", type=int, default=1000)
    fit.add_argument("--seed", type=int, default=0)

    asy = sub.add_parser("asymptotics", help="consistency, rate or poly-a studies")
    asy.add_argument("--study", required=True, choices=("consistency", "rate", "poly-a"))
    asy.add_argument("--prior", default="horseshoe")
    asy.add_argument("--schedule", default="poly-a",
                     help="poly-a[:a=..], exp-default or custom:<expression in n>")
    asy.add_argument("--n-grid", type=_int_list, default=None)
    asy.add_argument("--reps", type=int, default=400)
    asy.add_argument("--seed", type=int, default=0)
    asy.add_argument("--b", type=float, default=1.0, help="double-exponential rate (rate study)")
    asy.add_argument("--beta0", type=float, default=2.0, help="true coefficient (rate study)")
    asy.add_argument("--a", type=float, default=0.5, help="tail index (poly-a study)")
    asy.add_argument("--epsilon", type=float, default=0.3, help="poly-a epsilon")
    asy.add_argument("--p-schedule", default="n", help="p_n as an expression in n (poly-a)")
    asy.add_argument("--out", type=Path, help="CSV path (default: stdout)")
    asy.add_argument("--workers", type=int)

    orc = sub.add_parser("oracle-check", help="quadrature vs closed form vs Monte Carlo")
    orc.add_argument("--prior", default="de")
    orc.add_argument("--n", type=int, default=100)
    orc.add_argument("--tau-grid", type=_float_list, default=[1e-5, 1e-4, 1e-3, 1e-2, 1e-1])
    orc.add_argument("--beta-grid", type=_float_list, default=[0.1, 0.5, 1.0, 2.0, 3.0])
    orc.add_argument("--sigma2", type=float, default=1.0)
    orc.add_argument("--draws", type=lambda s: int(float(s)), default=10_000_000)
    orc.add_argument("--proposal", choices=("prior", "defensive"), default="defensive")
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--out", type=Path, help="CSV path (default: stdout)")
    return parser


def _sidecar(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def _cmd_simulate(args):
    configs = harness.load_config(args.config)
    if args.reps is not None:
        configs = [replace(c, replications=args.reps) for c in configs]
    cells = [harness.simulate_cell(c, args.workers) for c in configs]
    rows = [row for cell in cells for row in cell.rows]
    records = [rec for cell in cells for rec in cell.records]
    harness.write_metrics_csv(rows, args.out)
    harness.write_records_csv(records, args.records or _sidecar(args.out, ".records.csv"))
    harness.write_metadata_json(cells, args.metadata or _sidecar(args.out, ".meta.json"))
    print(f"wrote {len(rows)} rows to {args.out}")


def _resolve_prior(method):
    if method in harness.BAYES_PRIORS:
        return harness.BAYES_PRIORS[method]
    return parse_prior(method)


def _cmd_fit(args, out):
    ds = read_csv(args.data)
    rng = np.random.default_rng(args.seed)
    method = args.method.strip().lower()
    lines = []
    if method == "ls":
        beta = ols_fit(ds).beta_hat
        selected = tuple(range(ds.p))
    elif method in ("lasso", "adap-lasso"):
        if method == "lasso":
            lam = cv_select_lambda(ds, harness.CV_FOLDS, rng=rng)
            beta = lasso_cd(ds, lam)
            lines.append(f"lambda: {lam:.6g}")
        else:
            beta = adaptive_lasso(ds, rng=rng, folds=harness.CV_FOLDS)
        lines.append(f"intercept: {lasso_intercept(ds, beta):.6g}")
        selected = tuple(int(i) for i in np.flatnonzero(beta))
    else:
        prior = _resolve_prior(method)
        fit = ols_fit(ds)
        engine = args.engine
        if engine == "auto":
            engine = "quadrature" if fit.is_orthogonal else "gibbs"
        if args.tau is not None:
            tau = args.tau
        elif engine == "gibbs":
            tau = harness.choose_tau(ds, prior, harness.TauPolicy(), rng,
                                     args.iterations, args.burn_in)
        else:
            raise _UsageError("the quadrature engine needs --tau")
        if engine == "quadrature":
            pm = posterior_mean_orthogonal(prior, fit, ds.n, tau)
        else:
            pm = harness.gibbs_posterior_mean(ds, prior, tau, rng, args.iterations, args.burn_in)
        sel = ht_select(pm, fit.beta_hat)
        beta, selected = sel.ht_estimates, sel.selected
        lines.append(f"engine: {engine}")
        lines.append(f"tau: {tau:.6g}")
    lines.append("selected: " + " ".join(str(i + 1) for i in selected))
    lines.append("estimates: " + " ".join(f"{b:.6g}" for b in beta))
    print("\n".join(lines), file=out)


def _cmd_asymptotics(args, out):
    schedule = harness.ScheduleSpec.parse(args.schedule)
    if args.study == "consistency":
        grid = args.n_grid or [50, 200, 1000]
        rows = harness.run_consistency_study(parse_prior(args.prior), schedule, grid, args.reps,
                                             args.seed, workers=args.workers)
    elif args.study == "rate":
        grid = args.n_grid or [1000, 10000]
        rows = harness.run_rate_study(args.b, schedule, grid, args.reps, args.seed,
                                      beta0=args.beta0, workers=args.workers)
    else:
        grid = args.n_grid or [10 ** k for k in range(2, 9)]
        diag = harness.poly_a_diagnostic(schedule, args.a, args.p_schedule, args.epsilon, grid)
        _write_poly_a(diag, args.out, out)
        return
    _emit_rows(rows, args.out, out)


def _write_poly_a(diag, path, out):
    fh = open(path, "w", newline="") if path else out
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "size_term", "log_term"])
        for n, s, l in zip(diag.n_grid, diag.size_term, diag.log_term):
            w.writerow([n, repr(s), repr(l)])
    finally:
        if path:
            fh.close()
    print(f"size term decreasing: {diag.size_term_decreasing}; "
          f"log term decreasing: {diag.log_term_decreasing}", file=sys.stderr)


def _emit_rows(rows, path, out):
    if path:
        harness.write_rows_csv(rows, path)
        print(f"wrote {len(rows)} rows to {path}", file=sys.stderr)
        return
    w = csv.writer(out, lineterminator="\n")
    if rows:
        w.writerow(list(asdict(rows[0])))
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(row).values()])


def _cmd_oracle(args, out):
    rows = harness.oracle_check(parse_prior(args.prior), args.n, args.tau_grid, args.beta_grid,
                                args.sigma2, args.draws, args.seed, args.proposal)
    _emit_rows(rows, args.out, out)
    ok = sum(r.passes() for r in rows)
    print(f"{ok}/{len(rows)} cells agree", file=sys.stderr)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError(parser.format_usage().strip())
        if args.command == "simulate":
            _cmd_simulate(args)
        elif args.command == "fit":
            _cmd_fit(args, out)
        elif args.command == "asymptotics":
            _cmd_asymptotics(args, out)
        else:
            _cmd_oracle(args, out)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except harness.ReplicationFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc.__cause__, NumericalFailure) else EXIT_CONFIG
    except (HTShrinkError, ValueError, NotImplementedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
