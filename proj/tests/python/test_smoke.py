import json
import math

import pytest

import ustatbench as ub


def test_version():
    assert ub.__version__ == ub.version()


def test_sample_support_and_determinism():
    xs = ub.sample("example-pareto a=2", 1000, seed=7)
    assert len(xs) == 1000
    assert all(abs(x - 2.0) >= 1.0 for x in xs)
    assert xs == ub.sample("example-pareto a=2", 1000, seed=7)
    assert xs != ub.sample("example-pareto a=2", 1000, seed=8)


def test_sample_prefix_property():
    long = ub.sample("normal mean=0 sd=1", 100, seed=3)
    short = ub.sample("normal mean=0 sd=1", 40, seed=3)
    assert long[:40] == short


def test_bad_distribution():
    with pytest.raises(ub.ArgumentError):
        ub.sample("example-pareto", 10, seed=1)


def test_prefix_u_product():
    assert ub.prefix_u("product", 2, [1.0, 2.0, 3.0]) == [2.0, 11.0 / 3.0]


def test_prefix_u_matches_oracle():
    xs = ub.sample("normal mean=0 sd=1", 25, seed=4)
    for kernel in ("variance", "gini", "wilcoxon"):
        fast = ub.prefix_u(kernel, 2, xs)
        slow = ub.prefix_u(kernel, 2, xs, oracle=True)
        for a, b in zip(fast, slow):
            assert abs(a - b) <= 1e-10 * max(abs(b), 1.0)


def test_sup_abs_wiener_cdf_values():
    # mpmath reference values of P(sup |W| <= x).
    assert ub.sup_abs_wiener_cdf(1.0) == pytest.approx(0.3707774297995239054, rel=1e-12)
    assert ub.sup_abs_wiener_cdf(2.0) == pytest.approx(0.90899947615363375282, rel=1e-12)


def test_run_experiment():
    rep = ub.run_experiment("clt", seed=5, keys={"n": "100", "replications": "20"})
    assert len(rep["rows"]) == 20
    assert "ks_t0_1.0" in rep["aggregates"]
    assert "terminal" in rep["columns"]


def test_miller_sen_gate():
    with pytest.raises(ub.ConfigError, match="Miller-Sen conditions violated"):
        ub.run_experiment("miller-sen", seed=1)


def test_run_cli(tmp_path):
    code, out, err = ub.run_cli(
        ["verify", "thm3", "--kernel", "mean", "--m", "1", "--dist", "normal", "--n", "50",
         "--replications", "10", "--seed", "2", "--out", str(tmp_path)])
    assert code == ub.EXIT_OK, err
    agg = json.loads((tmp_path / "aggregates.json").read_text())
    assert agg["median_sup_error_self"] <= 1e-12
    assert ub.run_cli(["verify", "clt"])[0] == ub.EXIT_CONFIG
