import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from kaclab import glauber, lattice
from kaclab.errors import ConfigurationError, ParameterError, SchemaError
from kaclab.experiments import cli, runners, stats
from kaclab.experiments import testfunctions as tf
from kaclab.experiments.config import (SCHEMA, ExperimentConfig, lattice_size, scaling_record,
                                       schema_markdown, wants_periodize)
from kaclab.kernel import build_kernel
from kaclab.lattice import TorusField

FAST = {"gammas": [0.25], "T_burn": 0.05, "T_sample": 0.3, "cadence": 0.1, "replicas": 2,
        "observables": ["lp2", "pair:cos10", "magnetization"]}


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


# config ----------------------------------------------------------------------

def test_unknown_key_is_schema_error():
    with pytest.raises(SchemaError):
        ExperimentConfig.from_dict({"gamma": 0.25})


@pytest.mark.parametrize("bad", [{"mode": "nope"}, {"gammas": [1.5]}, {"replicas": 0},
                                 {"cadence": 0}, {"periodize": "maybe"}])
def test_invalid_values(bad):
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict(bad)


def test_schema_covers_every_field():
    cfg = ExperimentConfig()
    assert set(SCHEMA) == set(cfg.to_dict())
    for key, (default, _) in SCHEMA.items():
        assert getattr(cfg, key) == default
    table = schema_markdown()
    assert all(f"`{k}`" in table for k in SCHEMA)


def test_json_round_trip(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"mode": "phi42", "M": 8, "gammas": [0.5]}))
    cfg = ExperimentConfig.from_json(p)
    assert cfg.mode == "phi42" and cfg.M == 8 and cfg.gammas == [0.5]
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_scaling_record():
    assert lattice_size(0.125) == 64
    r = scaling_record(0.3)
    assert r["N"] == 11 and r["epsilon_mismatch"] == pytest.approx(1 / 11 - 0.09)
    assert wants_periodize("auto", 0.5, 4) and not wants_periodize("auto", 0.25, 16)
    assert wants_periodize(True, 0.25, 16)


# statistics ------------------------------------------------------------------

def ar1(n, rho, seed):
    rng = np.random.default_rng(seed)
    x = np.empty(n)
    x[0] = rng.standard_normal() / math.sqrt(1 - rho ** 2)
    e = rng.standard_normal(n)
    for i in range(1, n):
        x[i] = rho * x[i - 1] + e[i]
    return x


def test_autocorrelation_time_of_ar1():
    rho = 0.8
    tau = stats.integrated_autocorrelation_time(ar1(200_000, rho, 0))
    assert tau == pytest.approx((1 + rho) / (2 * (1 - rho)), rel=0.1)


def test_iid_stderr():
    x = np.random.default_rng(1).standard_normal(10_000)
    bm = stats.batch_means(x)
    assert bm.tau_int == pytest.approx(0.5, abs=0.1)
    assert bm.stderr == pytest.approx(0.01, rel=0.25)


def test_batch_means_error_covers_truth():
    # AR(1) with rho = 0.9: true variance of the mean is 19 / n / (1 - rho^2)
    hits = 0
    for s in range(40):
        bm = stats.batch_means(ar1(5000, 0.9, 100 + s))
        hits += abs(bm.mean) < 2 * bm.stderr
    assert hits >= 32


def test_batch_means_shrinks_with_length():
    x = ar1(80_000, 0.5, 2)
    se = [stats.batch_means(x[:n]).stderr for n in (5000, 20_000, 80_000)]
    assert se[0] > se[1] > se[2]
    assert se[0] / se[2] == pytest.approx(4.0, rel=0.3)


def test_batch_means_errors():
    with pytest.raises(ParameterError):
        stats.batch_means([1.0])
    with pytest.raises(ParameterError):
        stats.batch_means(np.arange(3.0), batch_length=2)


def test_ks_same_distribution_is_calibrated():
    rng = np.random.default_rng(3)
    crit = stats.ks_critical_value(500, 500, 0.05)
    rejections = sum(stats.compare_distributions(rng.standard_normal(500), rng.standard_normal(500)).ks > crit
                     for _ in range(100))
    assert rejections <= 12


def test_ks_detects_shift():
    rng = np.random.default_rng(4)
    cmp = stats.compare_distributions(rng.standard_normal(500), 0.5 + rng.standard_normal(500))
    assert cmp.ks > stats.ks_critical_value(500, 500, 0.01)
    assert cmp.moments[0].z > 3


def test_compare_moments_agree_for_equal_laws():
    rng = np.random.default_rng(5)
    cmp = stats.compare_distributions(rng.standard_normal(2000), rng.standard_normal(2000), orders=(1, 2))
    assert [r.order for r in cmp.moments] == [1, 2]
    assert all(r.z < 4 for r in cmp.moments)


def test_compare_needs_samples():
    with pytest.raises(ParameterError):
        stats.compare_distributions(np.zeros(10), np.zeros(500))


def test_ks_critical_value():
    assert stats.ks_critical_value(100, 100, 0.05) == pytest.approx(1.3581 * math.sqrt(0.02), rel=1e-3)


def test_linear_fit_exact():
    a, b, r2 = stats.linear_fit([0, 1, 2, 3], [1, 3, 5, 7])
    assert (a, b) == pytest.approx((1.0, 2.0)) and r2 == pytest.approx(1.0)


# test functions and pairings ------------------------------------------------

def test_named_test_functions():
    phi = tf.test_function("cos10", 8)
    assert lattice.inner_product(phi, phi) == pytest.approx(2.0)
    assert tf.pair_with_test_function(TorusField.constant(1.0, 8), "const") == pytest.approx(4.0)
    assert tf.pair_with_test_function(phi, "sin10") == pytest.approx(0.0, abs=1e-12)
    b = tf.test_function("bump", 8).values
    assert b.max() == pytest.approx(math.exp(-1)) and b.min() == 0
    with pytest.raises(ParameterError):
        tf.test_function("nope", 8)


@pytest.mark.parametrize("gamma", [0.25, 0.125, 0.0625])
def test_smoothed_pairing_is_spin_pairing_times_symbol(gamma):
    # K is symmetric and cos10 is an eigenfunction, so <K*s, phi> = Khat(1,0) <s, phi>
    k = build_kernel("bump", gamma, lattice_size(gamma))
    L = 2 * k.N
    rng = np.random.default_rng(6)
    phi = tf.test_function("cos10", k.N).values
    s = np.where(rng.random((L, L)) < 0.5 + 0.3 * phi, 1, -1)
    p = tf.compare_spin_pairing(s, k, "cos10")
    khat = k.spectrum[k.N, k.N - 1]
    assert p.smoothed == pytest.approx(khat * p.spin, rel=1e-10)
    assert p.difference == pytest.approx((1 - khat) * p.spin, rel=1e-8)


def test_pairing_gap_shrinks_like_gamma_squared():
    # 1 - Khat(1,0) ~ gamma^2 m pi^2 / 4 with second moment m = 1.8
    limit = 1.8 * math.pi ** 2 / 4
    rel = []
    for g in (0.25, 0.125, 0.0625):
        k = build_kernel("bump", g, lattice_size(g))
        rel.append(abs((1 - k.spectrum[k.N, k.N - 1]) / g ** 2 / limit - 1))
    assert rel[0] > rel[1] > rel[2] and rel[2] < 0.01


# runners ---------------------------------------------------------------------

def test_replica_seeds_and_threads():
    s1 = [np.random.default_rng(s).random() for s in runners.replica_seeds(7, 3)]
    s2 = [np.random.default_rng(s).random() for s in runners.replica_seeds(7, 3)]
    assert s1 == s2 and len(set(s1)) == 3
    out = runners.run_replicas(lambda a, b: a * b, [(1, 2), (3, 4), (5, 6)], threads=2)
    assert out == [2, 12, 30]


def test_glauber_run_outputs(tmp_path):
    summary = runners.run_experiment(dict(FAST), tmp_path)
    rows = read_csv(tmp_path / "records_g0.25.csv")
    assert tuple(rows[0]) == runners.RECORD_COLUMNS
    assert len(rows) == 1 + 2 * 4 * 3  # replicas x times x observables
    assert {r[2] for r in rows[1:]} == {"lp2", "pair:cos10", "magnetization"}
    times = sorted({float(r[1]) for r in rows[1:] if r[0] == "0"})
    assert times == pytest.approx([0.05, 0.15, 0.25, 0.35])
    summ = read_csv(tmp_path / "summary.csv")
    assert tuple(summ[0]) == runners.SUMMARY_COLUMNS
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["scaling"][0]["N"] == 16 and meta["config"]["seed"] == 0
    assert set(summary["0.25"]) == {"lp2", "pair:cos10", "magnetization"}


def test_identical_seed_identical_bytes(tmp_path):
    runners.run_experiment(dict(FAST), tmp_path / "a", seed=11)
    runners.run_experiment(dict(FAST), tmp_path / "b", seed=11, threads=2)
    runners.run_experiment(dict(FAST), tmp_path / "c", seed=12)
    a = (tmp_path / "a" / "records_g0.25.csv").read_bytes()
    assert a == (tmp_path / "b" / "records_g0.25.csv").read_bytes()
    assert a != (tmp_path / "c" / "records_g0.25.csv").read_bytes()


def test_empty_observables_give_header_only(tmp_path):
    runners.run_experiment({**FAST, "observables": []}, tmp_path)
    assert (tmp_path / "records_g0.25.csv").read_text() == ",".join(runners.RECORD_COLUMNS) + "\n"


def test_glauber_records_match_direct_computation(tmp_path):
    cfg = ExperimentConfig.from_dict({**FAST, "replicas": 1, "T_sample": 0.0})
    rows = runners.glauber_replica(runners.make_kernel(0.25), cfg, runners.replica_seeds(0, 1)[0], 0)
    k = runners.make_kernel(0.25)
    chain = glauber.GlauberChain(k, glauber.DynamicsParams.critical(k),
                                 seed=np.random.default_rng(runners.replica_seeds(0, 1)[0]))
    chain.run_macro(0.05)
    X = chain.fluctuation_field()
    got = {r[2]: r[3] for r in rows}
    assert got["lp2"] == pytest.approx(lattice.lp_norm(X, 2) ** 2, rel=1e-12)
    assert got["pair:cos10"] == pytest.approx(tf.pair_with_test_function(X, "cos10"), rel=1e-12)
    assert got["magnetization"] == pytest.approx(chain.spins.mean())


def test_record_value_format(tmp_path):
    runners.write_csv(tmp_path / "g.csv", runners.RECORD_COLUMNS, [(0, 0.1, "lp2", 1 / 3)])
    assert (tmp_path / "g.csv").read_text() == "replica_id,t_macro,observable_name,value\n0,0.1,lp2,0.3333333333333333\n"


def test_unknown_observable():
    with pytest.raises(ParameterError):
        runners._observable_fn("energy", 4)


def test_summarise_pools_replicas():
    rng = np.random.default_rng(8)
    rows = [(r, float(i), "x", float(v)) for r in range(4) for i, v in enumerate(rng.standard_normal(400))]
    s = runners.summarise(rows)["x"]
    assert s["n_samples"] == 1600
    assert s["stderr"] == pytest.approx(1 / 40, rel=0.25)


def test_phi42_run_outputs(tmp_path):
    cfg = {"mode": "phi42", "M": 4, "dt": 0.01, "T_burn": 0.1, "T_sample": 0.2, "cadence": 0.1,
           "batch": 2, "replicas": 2, "observables": ["lp2", "mean"]}
    summary = runners.run_experiment(cfg, tmp_path)
    rows = read_csv(tmp_path / "records.csv")
    assert len(rows) == 1 + 2 * 2 * 3 * 2
    assert sorted({r[0] for r in rows[1:]}) == ["0", "1", "2", "3"]
    assert summary["M"] == 4
    with pytest.raises(ParameterError):
        runners.phi42_replica(4, ExperimentConfig.from_dict({**cfg, "observables": ["magnetization"]}), 0, 0)


def test_oracle_mode(tmp_path):
    summary = runners.run_experiment({"mode": "oracle", "N": 1, "b_grid": [0.0, 0.5]}, tmp_path)
    rows = read_csv(tmp_path / "oracle.csv")
    assert len(rows) == 1 + 2 * 3
    assert all(v["invariance"] < 1e-12 and v["detailed_balance"] < 1e-12 for v in summary.values())


def test_kernel_scan_mode(tmp_path):
    summary = runners.run_experiment({"mode": "kernel-scan", "gammas": [0.5, 0.25, 0.125]}, tmp_path)
    rows = read_csv(tmp_path / "kernel_scan.csv")
    assert len(rows) == 4 and rows[1][2] == "bump"
    assert summary["slope"] > 0 and summary["r_squared"] > 0.95
    assert len(read_csv(tmp_path / "plot_C_gamma.csv")) == 4


def test_besov_corpus_mode(tmp_path):
    summary = runners.run_experiment({"mode": "besov-corpus", "gammas": [0.25], "corpus_size": 2}, tmp_path)
    rows = read_csv(tmp_path / "inequalities.csv")
    assert len(rows) == 1 + 4 * 4
    assert all(math.isfinite(v) for v in summary.values())


def test_ode_check_mode(tmp_path):
    summary = runners.run_experiment({"mode": "ode-check", "ode_draws": 5}, tmp_path)
    assert summary["draws"] == 5 and summary["violations"] == 0


def test_lp_scaling_rejects_odd_p():
    for p in (3, 1, 2.5):
        with pytest.raises(ParameterError):
            runners.lp_scaling_check([0.25], p)


@pytest.mark.parametrize("gamma,p", [(0.25, 2), (0.25, 4), (0.125, 3)])
def test_all_plus_lp_norm(gamma, p):
    assert runners.deterministic_lp_norm(gamma, p) == pytest.approx(4 * gamma ** -p, rel=1e-10)
    assert runners.deterministic_lp_norm(gamma, p, sign=-1) == pytest.approx(4 * gamma ** -p, rel=1e-10)


def test_lp_scaling_short_run():
    cfg = ExperimentConfig.from_dict({**FAST, "replicas": 1})
    res = runners.lp_scaling_check([0.5, 0.25], [2, 4], cfg)
    assert len(res["table"]) == 4
    assert set(res["ratio"]) == {2, 4} and all(r >= 1 for r in res["ratio"].values())


def test_ode_comparison_cases():
    # pure decay, pure source, zero start, both terms
    for c1, c2, lam, f0 in [(1.0, 0.0, 2.0, 3.0), (0.5, 2.0, 3.0, 0.0), (2.0, 0.1, 1.5, 10.0), (0.1, 5.0, 4.0, 0.01)]:
        res = runners.ode_comparison_check(c1, c2, lam, f0, 2.0)
        assert res.ok and res.max_violation <= 1e-9
    with pytest.raises(ParameterError):
        runners.ode_comparison_check(1.0, 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        runners.ode_comparison_check(-1.0, 0.0, 2.0, 1.0, 1.0)


def test_ode_comparison_detects_wrong_bound(monkeypatch):
    monkeypatch.setattr(runners, "comparison_bound", lambda t, c1, c2, lam, f0: 0.5 * np.ones_like(t) * f0)
    assert not runners.ode_comparison_check(1.0, 0.0, 2.0, 1.0, 1.0).ok


def test_wick_norm_sup_is_finite():
    k = runners.make_kernel(0.25)
    chain = glauber.GlauberChain(k, glauber.DynamicsParams.critical(k), seed=1)
    sup, vals = runners.wick_norm_sup(chain, window=0.02, grid=[0.1, 0.2])
    assert len(vals) == 2 and sup == max(vals) and math.isfinite(sup) and sup > 0


# command line ----------------------------------------------------------------

def test_cli_runs_mode(tmp_path, capsys):
    cfgp = tmp_path / "c.json"
    cfgp.write_text(json.dumps({"gammas": [0.5, 0.25]}))
    assert cli.main(["kernel-scan", "--config", str(cfgp), "--out", str(tmp_path / "o")]) == 0
    assert json.loads(capsys.readouterr().out)["rows"] == 2
    assert (tmp_path / "o" / "meta.json").exists()


def test_cli_schema_error(tmp_path, capsys):
    cfgp = tmp_path / "c.json"
    cfgp.write_text(json.dumps({"bogus": 1}))
    assert cli.main(["ode-check", "--config", str(cfgp), "--out", str(tmp_path / "o")]) == 2
    assert "bogus" in capsys.readouterr().err


def test_cli_overrides(tmp_path):
    assert cli.main(["ode-check", "--seed", "5", "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["config"]["seed"] == 5 and meta["config"]["mode"] == "ode-check"


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "kaclab.experiments.cli", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for mode in ("glauber", "phi42", "compare", "besov-corpus"):
        assert mode in out
