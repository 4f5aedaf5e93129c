import io

import numpy as np
import pytest

from htshrink import cli
from htshrink.data import (EXAMPLE_BETAS, GaussianDesignSpec, RegressionDataset, generate_dataset,
                           orthogonalize, write_csv)
from htshrink.errors import NumericalFailure

CELL = """example = 1
n = 30
sigma = 1
reps = 2
methods = ls, lasso, tpbn-0.1
seed = 5
iterations = 400
burn_in = 100
"""


def run(*argv):
    out = io.StringIO()
    code = cli.main(list(argv), out=out)
    return code, out.getvalue()


@pytest.fixture
def orthogonal_csv(tmp_path):
    rng = np.random.default_rng(0)
    X = orthogonalize(RegressionDataset(rng.standard_normal((60, 8)), np.zeros(60))).X
    Y = X @ np.array(EXAMPLE_BETAS[1]) + rng.standard_normal(60)
    path = tmp_path / "d.csv"
    write_csv(RegressionDataset(X, Y), path)
    return path


@pytest.fixture
def general_csv(tmp_path):
    ds = generate_dataset(GaussianDesignSpec(40, 8), np.array(EXAMPLE_BETAS[1]), 1.0,
                          np.random.default_rng(1))
    path = tmp_path / "g.csv"
    write_csv(ds, path)
    return path


class TestSimulate:
    def test_writes_tables(self, tmp_path):
        cfg = tmp_path / "cell.cfg"
        cfg.write_text(CELL)
        out = tmp_path / "table.csv"
        code, _ = run("simulate", "--config", str(cfg), "--out", str(out), "--workers", "1")
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == ("example,n,sigma,method,rpe_median,misclass_mean,"
                            "model_size_mean,replications")
        assert [ln.split(",")[3] for ln in lines[1:]] == ["ls", "lasso", "tpbn-0.1"]
        rec = (tmp_path / "table.records.csv").read_text().splitlines()
        assert rec[0] == "rep,seed,method,rpe,misclass,model_size,selected_indices"
        assert len(rec) == 1 + 2 * 3
        assert (tmp_path / "table.meta.json").exists()

    def test_reps_override_and_reproducible(self, tmp_path):
        cfg = tmp_path / "cell.cfg"
        cfg.write_text(CELL)
        blobs = []
        for k in range(2):
            out = tmp_path / f"t{k}.csv"
            assert run("simulate", "--config", str(cfg), "--out", str(out), "--reps", "1",
                       "--workers", "1")[0] == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]
        assert blobs[0].decode().splitlines()[1].endswith(",1")

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("example = 9\nn = 30\nsigma = 1\n")
        assert run("simulate", "--config", str(cfg), "--out", str(tmp_path / "o.csv"))[0] == 1

    def test_missing_config(self, tmp_path):
        assert run("simulate", "--config", str(tmp_path / "none.cfg"),
                   "--out", str(tmp_path / "o.csv"))[0] == 1


class TestFit:
    def test_quadrature_engine(self, orthogonal_csv):
        code, text = run("fit", "--data", str(orthogonal_csv), "--method", "tpbn-0.1",
                         "--tau", "0.01")
        assert code == 0
        lines = dict(ln.split(": ", 1) for ln in text.strip().splitlines())
        assert lines["engine"] == "quadrature"
        selected = [int(i) for i in lines["selected"].split()]
        assert set(selected) >= {1, 2, 5} and min(selected) >= 1
        est = [float(v) for v in lines["estimates"].split()]
        assert len(est) == 8
        assert all((e != 0) == (i + 1 in selected) for i, e in enumerate(est))

    def test_gibbs_engine(self, general_csv):
        code, text = run("fit", "--data", str(general_csv), "--method", "de", "--tau", "0.02",
                         "--iterations", "600", "--burn-in", "100")
        assert code == 0 and "engine: gibbs" in text

    @pytest.mark.parametrize("method", ["ls", "lasso", "adap-lasso"])
    def test_baselines(self, general_csv, method):
        code, text = run("fit", "--data", str(general_csv), "--method", method)
        assert code == 0 and "selected:" in text

    def test_prior_tag(self, orthogonal_csv):
        code, _ = run("fit", "--data", str(orthogonal_csv), "--method", "horseshoe-plus",
                      "--tau", "0.01")
        assert code == 0

    def test_quadrature_needs_tau(self, orthogonal_csv):
        assert run("fit", "--data", str(orthogonal_csv), "--method", "de")[0] == 1

    def test_unknown_method(self, orthogonal_csv):
        assert run("fit", "--data", str(orthogonal_csv), "--method", "ridge", "--tau", "1")[0] == 1

    def test_numerical_failure_exit(self, orthogonal_csv, monkeypatch):
        def boom(*args, **kwargs):
            raise NumericalFailure("quadrature budget exhausted", best_estimate=0.5)
        monkeypatch.setattr(cli, "posterior_mean_orthogonal", boom)
        assert run("fit", "--data", str(orthogonal_csv), "--method", "de", "--tau", "0.01")[0] == 2


class TestAsymptotics:
    def test_consistency_csv(self):
        code, text = run("asymptotics", "--study", "consistency", "--prior", "horseshoe",
                         "--schedule", "poly-a", "--n-grid", "50,200", "--reps", "10",
                         "--workers", "1")
        assert code == 0
        lines = text.strip().splitlines()
        assert lines[0].startswith("n,tau,proportion")
        assert [ln.split(",")[0] for ln in lines[1:]] == ["50", "200"]

    def test_rate_to_file(self, tmp_path):
        out = tmp_path / "rate.csv"
        code, _ = run("asymptotics", "--study", "rate", "--schedule", "exp-default",
                      "--n-grid", "1000", "--reps", "20", "--workers", "1", "--out", str(out))
        assert code == 0 and out.read_text().startswith("n,tau,mean_scaled")

    def test_poly_a(self):
        code, text = run("asymptotics", "--study", "poly-a", "--n-grid", "100,1000,10000")
        assert code == 0 and text.splitlines()[0] == "n,size_term,log_term"

    def test_bad_schedule(self):
        assert run("asymptotics", "--study", "consistency", "--schedule", "custom:os")[0] == 1


class TestOracleCheck:
    def test_small(self):
        code, text = run("oracle-check", "--tau-grid", "1e-3", "--beta-grid", "0.5,2",
                         "--draws", "1e5")
        assert code == 0 and len(text.strip().splitlines()) == 3


class TestUsage:
    @pytest.mark.parametrize("argv", [[], ["frobnicate"], ["fit"], ["simulate", "--config"]])
    def test_usage_errors_exit_one(self, argv):
        assert run(*argv)[0] == 1
