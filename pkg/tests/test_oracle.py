import csv
import math

import numpy as np
import pytest

from kaclab import oracle
from kaclab.errors import BudgetError, ParameterError
from kaclab.glauber import rate_formula
from kaclab.kernel import build_kernel


@pytest.fixture(scope="module")
def k1():
    return build_kernel("bump", 0.5, 1, periodize=True)


@pytest.fixture(scope="module")
def k2():
    return build_kernel("bump", 0.5, 2, periodize=True)


def brute_energy(spins, kernel, beta, b):
    """``beta/2 sum_{x,y} kappa(x-y) s_x s_y + b sum s`` by explicit loops over sites."""
    N = kernel.N
    L = 2 * N
    s = spins.reshape(L, L)
    H = 0.0
    for a in range(L):
        for c in range(L):
            for d in range(L):
                for e in range(L):
                    H += kernel.kappa[(a - d + N - 1) % L, (c - e + N - 1) % L] * s[a, c] * s[d, e]
    return 0.5 * beta * H + b * s.sum()


def test_configuration_bit_convention():
    S = oracle.all_configurations(3)
    assert S.shape == (8, 3)
    assert list(S[5]) == [1, -1, 1]  # 5 = 0b101
    assert list(S[0]) == [-1, -1, -1]


def test_interaction_matrix(k2):
    J = oracle.interaction_matrix(k2)
    assert np.allclose(J, J.T)
    assert np.all(np.diag(J) == 0)
    assert np.allclose(J.sum(axis=1), 1.0)


def test_energies_match_brute_force(k1):
    g = oracle.enumerate_gibbs(1, k1, 0.7, 0.2)
    for c in range(16):
        assert g.energy[c] == pytest.approx(brute_energy(g.spins[c], k1, 0.7, 0.2), abs=1e-12)


def test_weights_normalised_and_boltzmann(k2):
    g = oracle.enumerate_gibbs(2, k2, 0.9, 0.3)
    assert math.fsum(g.weights.tolist()) == pytest.approx(1.0, abs=1e-13)
    assert g.weights[7] / g.weights[100] == pytest.approx(math.exp(g.energy[7] - g.energy[100]))
    assert g.log_partition == pytest.approx(math.log(np.exp(g.energy).sum()))


def test_large_beta_is_stable(k1):
    g = oracle.enumerate_gibbs(1, k1, 500.0, 0.0)
    assert np.all(np.isfinite(g.weights))
    # two ground states share almost all the mass
    assert g.weights[0] + g.weights[-1] == pytest.approx(1.0, abs=1e-12)


def test_symmetry_at_zero_field(k2):
    g = oracle.enumerate_gibbs(2, k2, 0.9, 0.0)
    assert abs(oracle.magnetization(g, 3)) < 1e-14
    flipped = g.weights[::-1]  # complementing every bit reverses the index
    assert np.allclose(g.weights, flipped, atol=1e-16)


def test_positive_field_raises_magnetization(k2):
    ms = [oracle.magnetization(oracle.enumerate_gibbs(2, k2, 0.8, b)) for b in (0.0, 0.25, 0.5)]
    assert ms[0] < ms[1] < ms[2]


def test_ghs_covariance_nonincreasing(k2):
    for pair in [(0, 1), (0, 5), (0, 10)]:
        cov = [oracle.covariance(oracle.enumerate_gibbs(2, k2, 0.8, b), *pair)
               for b in (0, 0.25, 0.5, 1.0)]
        assert all(b < a - 1e-12 for a, b in zip(cov, cov[1:]))


def test_site_index(k2):
    g = oracle.enumerate_gibbs(2, k2, 0.5)
    assert g.site_index((1, 2)) == 6 and g.site_index(7) == 7
    with pytest.raises(ParameterError):
        g.site_index(16)


def test_budget_and_mismatch(k2):
    with pytest.raises(BudgetError):
        oracle.enumerate_gibbs(3, build_kernel("bump", 0.5, 3, periodize=True), 1.0)
    with pytest.raises(ParameterError):
        oracle.enumerate_gibbs(1, k2, 1.0)


def test_rates_use_simulation_formula(k2):
    g = oracle.enumerate_gibbs(2, k2, 0.9, 0.3)
    c = 1234
    h = oracle.interaction_matrix(k2) @ g.spins[c].astype(float)
    for z in range(16):
        assert oracle.rates(g, z)[c] == pytest.approx(rate_formula(g.spins[c, z], h[z], 0.9, 0.3))


def test_generator_matches_direct_sum(k1):
    g = oracle.enumerate_gibbs(1, k1, 0.6, 0.1)
    f = np.random.default_rng(0).standard_normal(16)
    Lf = oracle.apply_generator(g, f)
    c = 9
    direct = sum(oracle.rates(g, z)[c] * (f[c ^ (1 << z)] - f[c]) for z in range(4))
    assert Lf[c] == pytest.approx(direct)


def test_detailed_balance_small_lattice(k1):
    for beta, b in [(0.5, 0.0), (0.9, 0.3), (2.0, -0.7)]:
        assert oracle.detailed_balance_violation(oracle.enumerate_gibbs(1, k1, beta, b)) <= 1e-12


def test_invariance_small_lattice(k1):
    g = oracle.enumerate_gibbs(1, k1, 0.9, 0.3)
    assert oracle.check_invariance(g) <= 1e-12


def test_invariance_detects_wrong_measure(k1):
    g = oracle.enumerate_gibbs(1, k1, 0.9, 0.3)
    wrong = oracle.ExactGibbs(N=1, beta=0.9, b=0.3, kernel=k1, spins=g.spins, fields=g.fields,
                              energy=g.energy, weights=np.full(16, 1 / 16), log_partition=0.0)
    assert oracle.check_invariance(wrong) > 1e-3


def test_invariance_n2():
    k = build_kernel("bump", 0.5, 2, periodize=True)
    g = oracle.enumerate_gibbs(2, k, 0.9, 0.3)
    fs = oracle.invariance_test_functions(g, n_random=2)
    assert oracle.check_invariance(g, fs) <= 1e-10


def test_oracle_csv(k2, tmp_path):
    g = oracle.enumerate_gibbs(2, k2, 0.9, 0.0)
    rows = oracle.oracle_rows(g, pairs=((0, 1),))
    p = tmp_path / "o.csv"
    oracle.write_oracle_csv(p, rows)
    got = list(csv.reader(open(p, encoding="utf-8")))
    assert tuple(got[0]) == oracle.ORACLE_COLUMNS
    assert [r[3] for r in got[1:]] == ["m", "corr_0_1", "cov_0_1"]
    # pair correlation frozen from the enumeration
    assert float(got[2][4]) == pytest.approx(0.2051889429195333, abs=1e-13)
