"""Exact Gibbs measures of the Ising-Kac model on tiny lattices.

Configuration ``s`` (an integer in ``[0, 2^n)``) has spin ``+1`` at site ``i``
exactly when bit ``i`` of ``s`` is set; sites are numbered row-major over the
natural-order array of ``Lambda_N``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import BudgetError, ParameterError
from .glauber import rate_formula

MAX_SPINS = 20


def interaction_matrix(kernel):
    """``J[x, y] = kappa(x - y)`` over flattened sites (periodic differences)."""
    N = kernel.N
    L = 2 * N
    i, j = np.divmod(np.arange(L * L), L)
    di = (i[:, None] - i[None, :] + N - 1) % L
    dj = (j[:, None] - j[None, :] + N - 1) % L
    return kernel.kappa[di, dj]


def all_configurations(n):
    s = np.arange(2 ** n, dtype=np.int64)
    bits = (s[:, None] >> np.arange(n)) & 1
    return (2 * bits - 1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class ExactGibbs:
    """Exact Gibbs weights ``P(sigma) = exp(H(sigma)) / Z``.

    ``H(sigma) = beta/2 sum_{x,y} kappa(x-y) sigma_x sigma_y + b sum_x sigma_x``.
    """

    N: int
    beta: float
    b: float
    kernel: object
    spins: np.ndarray
    fields: np.ndarray
    energy: np.ndarray
    weights: np.ndarray
    log_partition: float

    @property
    def n_sites(self):
        return self.spins.shape[1]

    def site_index(self, x):
        if isinstance(x, (tuple, list)):
            return int(x[0]) * 2 * self.N + int(x[1])
        x = int(x)
        if not 0 <= x < self.n_sites:
            raise ParameterError(f"site {x} outside the lattice")
        return x


def enumerate_gibbs(N, kernel, beta, b=0.0):
    """Enumerate all ``2^{4N^2}`` configurations; log-sum-exp normalisation."""
    n = 4 * N * N
    if n > MAX_SPINS:
        raise BudgetError(f"{n} spins exceed the enumeration budget of {MAX_SPINS}")
    if kernel.N != N:
        raise ParameterError(f"kernel built for N={kernel.N}, lattice has N={N}")
    S = all_configurations(n)
    J = interaction_matrix(kernel)
    h = S @ J.T
    H = 0.5 * beta * np.einsum("ci,ci->c", S, h) + b * S.sum(axis=1)
    logZ = float(logsumexp(H))
    w = np.exp(H - logZ)
    return ExactGibbs(N=N, beta=float(beta), b=float(b), kernel=kernel, spins=S, fields=h,
                      energy=H, weights=w, log_partition=logZ)


def exact_expectation(g, observable):
    """``E[f]`` for ``f`` given as a table over configurations or a callable of the spin matrix."""
    vals = observable(g.spins) if callable(observable) else np.asarray(observable, dtype=float)
    return math.fsum((g.weights * vals).tolist())


def magnetization(g, x=0):
    return exact_expectation(g, g.spins[:, g.site_index(x)])


def covariance(g, x, y):
    """``E[sigma_x sigma_y] - E[sigma_x] E[sigma_y]``."""
    sx = g.spins[:, g.site_index(x)].astype(float)
    sy = g.spins[:, g.site_index(y)].astype(float)
    return exact_expectation(g, sx * sy) - exact_expectation(g, sx) * exact_expectation(g, sy)


def _flip_index(g, z):
    return np.arange(g.spins.shape[0], dtype=np.int64) ^ (1 << z)


def rates(g, z):
    """Flip rate at site ``z`` in every configuration (the simulation's own formula)."""
    return rate_formula(g.spins[:, z], g.fields[:, z], g.beta, g.b)


def apply_generator(g, f):
    """``(L f)(sigma) = sum_z c(z, sigma) (f(sigma^z) - f(sigma))`` for a table ``f``."""
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    for z in range(g.n_sites):
        out += rates(g, z) * (f[_flip_index(g, z)] - f)
    return out


def invariance_test_functions(g, n_random=8, seed=0):
    """``sigma_x``, ``sigma_x sigma_y`` for all sites and pairs, and random +-1 tables."""
    S = g.spins.astype(float)
    n = g.n_sites
    fs = [("const", np.ones(S.shape[0]))]
    fs += [(f"s{x}", S[:, x]) for x in range(n)]
    fs += [(f"s{x}s{y}", S[:, x] * S[:, y]) for x in range(n) for y in range(x + 1, n)]
    rng = np.random.default_rng(seed)
    fs += [(f"rand{k}", rng.choice([-1.0, 1.0], S.shape[0])) for k in range(n_random)]
    return fs


def check_invariance(g, test_functions=None):
    """``max_f |sum_sigma P(sigma) (L f)(sigma)|`` over the test family."""
    fs = invariance_test_functions(g) if test_functions is None else test_functions
    worst = 0.0
    for _, f in fs:
        worst = max(worst, abs(exact_expectation(g, apply_generator(g, f))))
    return worst


def detailed_balance_violation(g):
    """``max |c(z,s) e^{H(s)} / (c(z,s^z) e^{H(s^z)}) - 1|`` over all ``(s, z)``."""
    worst = 0.0
    for z in range(g.n_sites):
        flip = _flip_index(g, z)
        lhs = np.log(rates(g, z)) + g.energy
        rhs = lhs[flip]
        worst = max(worst, float(np.abs(np.expm1(lhs - rhs)).max()))
    return worst


ORACLE_COLUMNS = ("N", "beta", "b", "observable", "exact_value")


def oracle_rows(g, pairs=((0, 1),)):
    rows = [(g.N, g.beta, g.b, "m", magnetization(g))]
    for x, y in pairs:
        rows.append((g.N, g.beta, g.b, f"corr_{x}_{y}",
                     exact_expectation(g, g.spins[:, x] * g.spins[:, y].astype(float))))
        rows.append((g.N, g.beta, g.b, f"cov_{x}_{y}", covariance(g, x, y)))
    return rows


def write_oracle_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ORACLE_COLUMNS)
        for N, beta, b, name, value in rows:
            w.writerow([N, repr(float(beta)), repr(float(b)), name, repr(float(value))])
