"""Experiment drivers: replica scheduling, observable streams and summary checks."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .. import besov, glauber, lattice, oracle, phi42
from ..errors import ConfigurationError, ParameterError
from ..kernel import build_kernel, verify_kernel_bounds
from ..lattice import TorusField
from .config import ExperimentConfig, lattice_size, scaling_record, wants_periodize
from .stats import batch_means, compare_distributions, linear_fit
from .testfunctions import test_function

RECORD_COLUMNS = ("replica_id", "t_macro", "observable_name", "value")
SUMMARY_COLUMNS = ("gamma", "observable", "mean", "stderr", "n_samples", "batch_length", "tau_int")


def make_kernel(gamma, profile="bump", periodize="auto"):
    """Kernel on ``Lambda_N`` with ``N = round(gamma^-2)``."""
    N = lattice_size(gamma)
    return build_kernel(profile, gamma, N, periodize=wants_periodize(periodize, gamma, N))


def replica_seeds(seed, n):
    return np.random.SeedSequence(seed).spawn(n)


def run_replicas(fn, args, threads=1):
    """``[fn(*a) for a in args]`` on a thread pool, results in submission order."""
    if threads <= 1:
        return [fn(*a) for a in args]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, *a) for a in args]
        return [f.result() for f in futures]


# observables -----------------------------------------------------------------

def _observable_fn(name, N):
    """Map ``(..., 2N, 2N)`` field arrays to values; returns a vectorised callable."""
    eps2 = 1.0 / N ** 2
    if name.startswith("lp"):
        p = int(name[2:])
        return lambda X: np.sum(np.abs(X) ** p, axis=(-2, -1)) * eps2
    if name.startswith("pair:"):
        phi = test_function(name[5:], N).values
        return lambda X: np.einsum("...ij,ij->...", X, phi) * eps2
    if name == "mean":
        return lambda X: X.mean(axis=(-2, -1))
    raise ParameterError(f"unknown observable {name!r}")


def _observable_table(names, N):
    return {n: _observable_fn(n, N) for n in names if n != "magnetization"}


# glauber ---------------------------------------------------------------------

def glauber_replica(kernel, config, seed, replica_id, observables=None):
    """Burn in from fair coins, then record observables every ``cadence``."""
    names = config.observables if observables is None else observables
    table = _observable_table(names, kernel.N)
    params = glauber.DynamicsParams.critical(kernel, A=config.A, b=config.b)
    chain = glauber.GlauberChain(kernel, params, seed=np.random.default_rng(seed))
    chain.run_macro(config.T_burn)
    start = chain.t_micro
    n = int(round(config.T_sample / config.cadence))
    rows = []
    for i in range(n + 1):
        if i:
            chain.run_until(start + i * config.cadence / params.alpha)
        X = chain.local_field / params.delta
        for name in names:
            if name == "magnetization":
                v = float(chain.spins.mean())
            else:
                v = float(table[name](X))
            rows.append((replica_id, chain.t_macro, name, v))
    return rows


def phi42_replica(M, config, seed, replica_id, observables=None):
    """``config.batch`` trajectories advanced together; replica ids ``replica_id*batch + j``."""
    names = config.observables if observables is None else observables
    table = _observable_table(names, M)
    if "magnetization" in names:
        raise ParameterError("magnetization is a spin observable")
    pc = phi42.Phi42Config(M=M, A=config.A, dt=config.dt, T_burn=config.T_burn,
                           T_sample=config.T_sample, cadence=config.cadence, batch=config.batch,
                           scheme=config.scheme, restart_interval=config.restart_interval)
    run = phi42.run_phi42(pc, np.random.default_rng(seed), table)
    rows = []
    for j in range(config.batch):
        for i, t in enumerate(run.times):
            for name in names:
                rows.append((replica_id * config.batch + j, config.T_burn + float(t), name,
                             float(run.observables[name][i][j])))
    return rows


# output ----------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


class LineWriter:
    """CSV writer issuing one ``write`` per complete line (valid if interrupted)."""

    def __init__(self, path, columns):
        self.fh = open(path, "w", newline="", encoding="utf-8", buffering=1)
        self.write(columns)

    def write(self, row):
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow([_fmt(v) for v in row])
        self.fh.write(buf.getvalue())

    def close(self):
        self.fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv(path, columns, rows):
    with LineWriter(path, columns) as w:
        for r in rows:
            w.write(r)


def write_plot_data(path, x, y, yerr=None):
    yerr = [0.0] * len(x) if yerr is None else yerr
    write_csv(path, ("x", "y", "yerr"), [(float(a), float(b), float(c)) for a, b, c in zip(x, y, yerr)])


def summarise(rows):
    """Per-observable batch-means summary across replicas.

    Each replica's series gives a batch-means standard error; replicas are
    independent so the pooled error is ``sqrt(mean(se^2) / R)``.
    """
    series = {}
    for rid, _, name, v in rows:
        series.setdefault(name, {}).setdefault(rid, []).append(v)
    out = {}
    for name, reps in series.items():
        means, ses, bls, taus, n = [], [], [], [], 0
        for vals in reps.values():
            n += len(vals)
            if len(vals) >= 20:
                bm = batch_means(vals)
                means.append(bm.mean)
                ses.append(bm.stderr)
                bls.append(bm.batch_length)
                taus.append(bm.tau_int)
            else:
                means.append(float(np.mean(vals)))
        R = len(means)
        if ses and len(ses) == R:
            se = math.sqrt(np.mean(np.square(ses)) / R)
        elif R > 1:
            se = float(np.std(means, ddof=1) / math.sqrt(R))
        else:
            se = math.nan
        out[name] = {"mean": float(np.mean(means)), "stderr": se, "n_samples": n,
                     "batch_length": int(max(bls)) if bls else 0,
                     "tau_int": float(np.mean(taus)) if taus else math.nan}
    return out


# main entry ------------------------------------------------------------------

def run_experiment(config, out_dir, seed=None, replicas=None, threads=1):
    """Run ``config`` and write CSV outputs plus ``meta.json`` into ``out_dir``.

    ``seed`` and ``replicas`` override the config.  Returns the summary dict.
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    if seed is not None:
        config.seed = int(seed)
    if replicas is not None:
        config.replicas = int(replicas)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = {
        "glauber": _run_glauber, "phi42": _run_phi42, "oracle": _run_oracle,
        "compare": _run_compare, "kernel-scan": _run_kernel_scan,
        "besov-corpus": _run_besov_corpus, "ode-check": _run_ode_check,
    }[config.mode]
    summary = runner(config, out, threads)
    meta = {"config": config.to_dict(), "scaling": [scaling_record(g) for g in config.gammas],
            "summary": summary}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=float) + "\n")
    return summary


def _gamma_tag(g):
    return f"{g:g}"


def _run_glauber(config, out, threads):
    summary = {}
    with LineWriter(out / "summary.csv", SUMMARY_COLUMNS) as sw:
        for g in config.gammas:
            k = make_kernel(g, config.profile, config.periodize)
            seeds = replica_seeds(config.seed, config.replicas)
            results = run_replicas(glauber_replica, [(k, config, s, r) for r, s in enumerate(seeds)], threads)
            rows = [row for res in results for row in res]
            write_csv(out / f"records_g{_gamma_tag(g)}.csv", RECORD_COLUMNS, rows)
            summ = summarise(rows)
            for name in config.observables:
                if name in summ:
                    s = summ[name]
                    sw.write((g, name, s["mean"], s["stderr"], s["n_samples"], s["batch_length"], s["tau_int"]))
            summary[_gamma_tag(g)] = summ
    return summary


def _run_phi42(config, out, threads):
    M = config.M or lattice_size(config.gammas[0])
    seeds = replica_seeds(config.seed, config.replicas)
    results = run_replicas(phi42_replica, [(M, config, s, r) for r, s in enumerate(seeds)], threads)
    rows = [row for res in results for row in res]
    write_csv(out / "records.csv", RECORD_COLUMNS, rows)
    summ = summarise(rows)
    write_csv(out / "summary.csv", SUMMARY_COLUMNS,
              [(math.nan, n, s["mean"], s["stderr"], s["n_samples"], s["batch_length"], s["tau_int"])
               for n, s in summ.items()])
    return {"M": M, **summ}


def _run_oracle(config, out, threads):
    k = build_kernel("bump", config.oracle_gamma, config.N, periodize=True)
    rows, checks = [], {}
    for b in config.b_grid:
        g = oracle.enumerate_gibbs(config.N, k, config.beta, b)
        rows += oracle.oracle_rows(g)
        checks[repr(float(b))] = {"invariance": oracle.check_invariance(g),
                                  "detailed_balance": oracle.detailed_balance_violation(g)}
    oracle.write_oracle_csv(out / "oracle.csv", rows)
    return checks


def _run_kernel_scan(config, out, threads):
    rows, x, y = [], [], []
    for g in config.gammas:
        k = make_kernel(g, config.profile, config.periodize)
        r = verify_kernel_bounds(k)
        rows.append((g, k.N, k.profile, k.c_gamma, r.upper_C, r.lower_c, r.max_abs_symbol,
                     r.anisotropy, r.passed))
        x.append(math.log(1.0 / g))
        y.append(k.c_gamma)
    write_csv(out / "kernel_scan.csv", ("gamma", "N", "profile", "C_gamma", "upper_C", "lower_c",
                                        "max_abs_symbol", "anisotropy", "passed"), rows)
    write_plot_data(out / "plot_C_gamma.csv", x, y)
    summary = {"rows": len(rows)}
    if len(x) >= 2:
        a, b, r2 = linear_fit(x, y)
        summary.update(intercept=a, slope=b, r_squared=r2)
    return summary


def _run_besov_corpus(config, out, threads):
    rows = []
    worst = {}
    for g in config.gammas:
        k = make_kernel(g, config.profile, config.periodize)
        bank = besov.build_block_bank(k.N)
        corpus = besov.field_corpus(k.N, config.corpus_size, seed=config.seed)
        cid = f"N{k.N}_seed{config.seed}"
        for i, f in enumerate(corpus):
            checks = [
                ("regularity", f"nu={config.nu};gamma={g}", besov.check_regularity_bound(f, k, config.nu, bank)),
                ("duality", "alpha=0;p=2;q=2", besov.check_duality(f, corpus[(i + 1) % len(corpus)], 0.0, 2, 2, bank)),
                ("lp_extension", "p=4;kappa=0.1", besov.check_lp_extension_bound(f, 4, 0.1)),
                ("embedding", "nu=0.2;p=20", besov.check_negative_besov_embedding(f, 0.2, 20, bank)),
            ]
            for ineq, params, c in checks:
                rows.append((ineq, params, c.lhs, c.rhs, c.ratio, cid))
                key = f"{ineq}@{_gamma_tag(g)}"
                worst[key] = max(worst.get(key, 0.0), c.ratio)
    besov.write_inequality_csv(out / "inequalities.csv", rows)
    return worst


def _run_ode_check(config, out, threads):
    rng = np.random.default_rng(config.seed)
    rows, worst = [], -math.inf
    for _ in range(config.ode_draws):
        c1, c2, lam, f0, T = random_comparison_parameters(rng)
        res = ode_comparison_check(c1, c2, lam, f0, T)
        rows.append((c1, c2, lam, f0, T, res.max_violation, res.ok))
        worst = max(worst, res.max_violation)
    write_csv(out / "ode_check.csv", ("c1", "c2", "lambda", "f0", "T", "max_violation", "ok"), rows)
    return {"draws": config.ode_draws, "max_violation": worst,
            "violations": sum(1 for r in rows if not r[-1])}


def _run_compare(config, out, threads):
    g = config.gammas[0]
    res = cross_model_samples(g, config, threads)
    cmp = compare_distributions(res["glauber"], res["phi42"])
    write_csv(out / "samples.csv", ("model", "index", "value"),
              [(m, i, float(v)) for m in ("glauber", "phi42") for i, v in enumerate(res[m])])
    write_csv(out / "moments.csv", ("order", "glauber", "glauber_stderr", "phi42", "phi42_stderr", "z"),
              [(r.order, r.value_a, r.stderr_a, r.value_b, r.stderr_b, r.z) for r in cmp.moments])
    return {"ks": cmp.ks, "pvalue": cmp.pvalue, "M": res["M"],
            "moments": [asdict(r) for r in cmp.moments]}


# analyses --------------------------------------------------------------------

def cross_model_samples(gamma, config, threads=1):
    """Equilibrium samples of ``<X, phi>`` from the Glauber chain and from Phi^4_2.

    Both models draw ``config.n_samples`` samples spaced ``config.cadence``
    apart after ``config.T_burn``, split evenly over ``config.replicas``
    (Glauber) or ``config.batch`` (Phi^4_2) independent trajectories.
    """
    name = f"pair:{config.test_function}"
    k = make_kernel(gamma, config.profile, config.periodize)
    M = config.M or k.N

    per = int(math.ceil(config.n_samples / config.replicas))
    gc = ExperimentConfig(**{**config.to_dict(), "mode": "glauber",
                             "T_sample": (per - 1) * config.cadence})
    seeds = replica_seeds(config.seed, config.replicas + 1)
    res = run_replicas(glauber_replica, [(k, gc, s, r, [name]) for r, s in enumerate(seeds[:-1])], threads)
    gvals = np.array([row[3] for rr in res for row in rr])[:config.n_samples]

    per_b = int(math.ceil(config.n_samples / config.batch))
    pc = ExperimentConfig(**{**config.to_dict(), "mode": "phi42",
                             "T_sample": (per_b - 1) * config.cadence})
    prow = phi42_replica(M, pc, seeds[-1], 0, [name])
    pvals = np.array([row[3] for row in prow])[:config.n_samples]
    return {"glauber": gvals, "phi42": pvals, "M": M}


def lp_scaling_check(gammas, p, config=None, threads=1):
    """``gamma^{p/2} E||X_gamma||_p^p`` at equilibrium for each ``gamma``.

    ``p`` may be an even integer or a sequence of them.  Returns a dict with
    the table rows ``(gamma, p, normalised mean, normalised stderr)`` and, per
    ``p``, the max/min ratio of the normalised means and whether it is ``<= 4``.
    """
    ps = [p] if np.isscalar(p) else list(p)
    for q in ps:
        if int(q) != q or q < 2 or q % 2:
            raise ParameterError(f"p must be an even integer >= 2, got {q}")
    config = config or ExperimentConfig()
    names = [f"lp{int(q)}" for q in ps]
    cfg = ExperimentConfig(**{**config.to_dict(), "mode": "glauber", "observables": names})
    table, ratios = [], {}
    for g in gammas:
        k = make_kernel(g, cfg.profile, cfg.periodize)
        seeds = replica_seeds(cfg.seed, cfg.replicas)
        res = run_replicas(glauber_replica, [(k, cfg, s, r) for r, s in enumerate(seeds)], threads)
        summ = summarise([row for rr in res for row in rr])
        for q, n in zip(ps, names):
            f = g ** (q / 2.0)
            table.append((g, int(q), f * summ[n]["mean"], f * summ[n]["stderr"]))
    for q in ps:
        vals = [r[2] for r in table if r[1] == q]
        ratios[int(q)] = max(vals) / min(vals)
    return {"table": table, "ratio": ratios, "bounded": {q: r <= 4.0 for q, r in ratios.items()}}


def deterministic_lp_norm(gamma, p, sign=1):
    """``||X_gamma||_p^p`` for the all-plus (or all-minus) state: ``4 gamma^-p``."""
    k = make_kernel(gamma)
    params = glauber.DynamicsParams.critical(k)
    L = 2 * k.N
    chain = glauber.GlauberChain(k, params, spins=np.full((L, L), sign))
    return lattice.lp_norm(chain.fluctuation_field(), p) ** p


@dataclass
class ODECheck:
    ok: bool
    max_violation: float
    t: np.ndarray
    f: np.ndarray
    bound: np.ndarray


def comparison_bound(t, c1, c2, lam, f0):
    """``f0 / (1 + c1 (lam-1) t f0^{lam-1})^{1/(lam-1)}`` or ``(c2/c1)^{1/lam}``, whichever is larger."""
    decay = f0 / (1.0 + c1 * (lam - 1.0) * t * f0 ** (lam - 1.0)) ** (1.0 / (lam - 1.0))
    return np.maximum(decay, (c2 / c1) ** (1.0 / lam))


def ode_comparison_check(c1, c2, lam, f0, T, n_mesh=2001, tol=1e-9):
    """Integrate ``f' = -2 c1 f^lam + c2`` (DOP853, rtol 1e-12) and compare with the bound."""
    if not lam > 1:
        raise ParameterError(f"lambda must exceed 1, got {lam}")
    if not c1 > 0 or c2 < 0 or f0 < 0 or not T > 0:
        raise ParameterError("need c1 > 0, c2 >= 0, f0 >= 0 and T > 0")
    t = np.linspace(0.0, T, n_mesh)
    sol = solve_ivp(lambda s, f: -2.0 * c1 * np.maximum(f, 0.0) ** lam + c2, (0.0, T), [f0],
                    method="DOP853", rtol=1e-12, atol=1e-14, t_eval=t)
    f = sol.y[0]
    bound = comparison_bound(t, c1, c2, lam, f0)
    viol = float(np.max(f - bound))
    return ODECheck(bool(viol <= tol), viol, t, f, bound)


def random_comparison_parameters(rng):
    c1 = float(10 ** rng.uniform(-1, 1))
    c2 = float(10 ** rng.uniform(-2, 1)) if rng.random() > 0.1 else 0.0
    lam = float(rng.uniform(1.1, 4.0))
    f0 = float(10 ** rng.uniform(-2, 1.5)) if rng.random() > 0.1 else 0.0
    T = float(rng.uniform(0.5, 5.0))
    return c1, c2, lam, f0, T


def wick_norm_sup(chain, window=0.01, grid=None, nu=0.1, lam=0.1, j=3, bank=None):
    """``sup_s s^lam ||H_j(Z_gamma(s), C_gamma)||_{C^-nu(Lambda_eps)}`` over a time grid.

    ``Z_gamma`` starts from zero at the chain's current time.
    """
    grid = np.round(np.arange(1, 11) * 0.1, 12) if grid is None else grid
    k = chain.kernel
    bank = bank or besov.build_block_bank(k.N)
    spec = besov.BesovSpec(-nu, math.inf, math.inf)
    samples = glauber.cosimulate_linearization(chain, window, float(max(grid)), sample_times=grid)
    vals = [s.t ** lam * besov.besov_norm(glauber.wick_observable(s.Z, j, k.c_gamma), spec, bank)
            for s in samples]
    return max(vals), vals


def _wick_replica(k, config, seed, window):
    params = glauber.DynamicsParams.critical(k, A=config.A, b=config.b)
    chain = glauber.GlauberChain(k, params, seed=np.random.default_rng(seed))
    chain.run_macro(config.T_burn)
    return wick_norm_sup(chain, window)[0]


def wick_norm_check(gammas, config=None, window=0.01, threads=1):
    """Replica-averaged grid supremum of the cubic Wick norm for each ``gamma``."""
    config = config or ExperimentConfig()
    out = {}
    for g in gammas:
        k = make_kernel(g, config.profile, config.periodize)
        seeds = replica_seeds(config.seed, config.replicas)
        vals = run_replicas(_wick_replica, [(k, config, s, window) for s in seeds], threads)
        out[g] = {"mean": float(np.mean(vals)), "values": [float(v) for v in vals]}
    return out
