"""Paley-Littlewood blocks and discrete/continuous Besov norms on the lattice torus."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import lattice
from .errors import ParameterError
from .lattice import TorusField

INNER, OUTER = 0.75, 4.0 / 3.0


def _psi(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def smooth_step(u):
    """``T(u) = psi(u) / (psi(u) + psi(1 - u))`` with ``psi(u) = e^{-1/u} 1{u > 0}``.

    Smooth, 0 for ``u <= 0`` and 1 for ``u >= 1``.
    """
    a, b = _psi(u), _psi(1.0 - np.asarray(u, dtype=float))
    return a / (a + b)


def chi_tilde(r):
    """Radial cut-off: 1 on ``|w| <= 3/4``, 0 on ``|w| >= 4/3``."""
    return 1.0 - smooth_step((np.asarray(r, dtype=float) - INNER) / (OUTER - INNER))


def chi(r):
    """Annular cut-off ``chi_tilde(r/2) - chi_tilde(r)``, supported in ``[3/4, 8/3]``."""
    r = np.asarray(r, dtype=float)
    return chi_tilde(r / 2.0) - chi_tilde(r)


@dataclass(frozen=True, eq=False)
class PaleyLittlewoodBank:
    """Block multipliers ``chi_k(w)`` over ``Lambda_N``, natural order.

    ``masks[k + 1]`` holds block ``k`` for ``k = -1, ..., k_max``.
    """

    N: int
    d: int
    k_max: int
    masks: np.ndarray

    def mask(self, k):
        _check_block(self, k)
        return self.masks[k + 1]

    @property
    def blocks(self):
        return range(-1, self.k_max + 1)


def build_block_bank(N, d=2):
    """Blocks ``chi_{-1} = chi_tilde`` and ``chi_k = chi(2^-k .)`` up to ``k_max``.

    ``k_max`` is the least ``K`` with ``2^{K+1} * 3/4 >= max |w|``; the sum then
    telescopes to ``chi_tilde(2^{-K-1} w) = 1`` on every lattice frequency.
    """
    if N < 1:
        raise ParameterError("N must be positive")
    r = np.sqrt(lattice.squared_frequency(N, d))
    rmax = float(r.max())
    k_max = max(0, math.ceil(math.log2(rmax / INNER)) - 1) if rmax > INNER else 0
    masks = [chi_tilde(r)] + [chi(r / 2.0 ** k) for k in range(k_max + 1)]
    masks = np.stack(masks)
    masks.setflags(write=False)
    return PaleyLittlewoodBank(N=N, d=d, k_max=k_max, masks=masks)


def _check_block(bank, k):
    if int(k) != k or not -1 <= k <= bank.k_max:
        raise ParameterError(f"block index must lie in [-1, {bank.k_max}], got {k}")


def _bank_for(f, bank):
    if bank is None:
        return build_block_bank(f.N, f.d)
    if bank.N != f.N or bank.d != f.d:
        raise ParameterError(f"bank built for N={bank.N}, field has N={f.N}")
    return bank


def project_block(f, k, bank=None):
    """``delta_k f``: the field with spectrum ``chi_k(w) fhat(w)``."""
    bank = _bank_for(f, bank)
    return TorusField.from_spectrum(bank.mask(k) * f.spectrum, f.N)


def eta_k(k, bank):
    """Convolution kernel ``eta_k(x) = 2^-d sum_w chi_k(w) e_w(x)`` on the lattice."""
    return TorusField(lattice.fft_inverse(bank.mask(k).astype(complex), bank.N, bank.d))


@dataclass(frozen=True)
class BesovSpec:
    nu: float
    p: float = 2.0
    q: float = 2.0
    mode: str = "discrete"
    refine: int = 4

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not (v == math.inf or v >= 1):
                raise ParameterError(f"{name} must lie in [1, inf], got {v}")
        if self.mode not in ("discrete", "continuous"):
            raise ParameterError(f"mode must be 'discrete' or 'continuous', got {self.mode!r}")


def block_norms(f, p, bank=None, mode="discrete", refine=4):
    """``[||delta_k Ext f||_{L^p} for k = -1..k_max]`` on the lattice or a refined grid."""
    bank = _bank_for(f, bank)
    out = []
    for k in bank.blocks:
        spec = bank.masks[k + 1] * f.spectrum
        if mode == "continuous" and refine > 1:
            spec = lattice.resample_spectrum(spec, f.N, f.N * refine, f.d)
            g = TorusField.from_spectrum(spec, f.N * refine)
        else:
            g = TorusField.from_spectrum(spec, f.N)
        out.append(lattice.lp_norm(g, p))
    return np.array(out)


def besov_norm(f, spec, bank=None):
    """``(sum_k 2^{nu k q} ||delta_k f||_p^q)^{1/q}`` (supremum when ``q = inf``).

    Discrete mode takes ``L^p(Lambda_eps)``; continuous mode approximates
    ``L^p(T^d)`` of the extension on a ``spec.refine``-times finer grid.
    """
    bank = _bank_for(f, bank)
    norms = block_norms(f, spec.p, bank, spec.mode, spec.refine)
    weights = 2.0 ** (spec.nu * np.arange(-1, bank.k_max + 1))
    terms = weights * norms
    if spec.q == math.inf:
        return float(terms.max())
    return float(np.sum(terms ** spec.q) ** (1.0 / spec.q))


def refinement_study(f, spec, factors=(1, 2, 4, 8), bank=None):
    """Continuous-mode norm at several refinement factors (convergence report)."""
    return {r: besov_norm(f, BesovSpec(spec.nu, spec.p, spec.q, "continuous", r), bank)
            for r in factors}


def conjugate(p):
    if p == 1:
        return math.inf
    if p == math.inf:
        return 1.0
    return p / (p - 1.0)


@dataclass
class InequalityCheck:
    lhs: float
    rhs: float
    ratio: float


def _ratio(lhs, rhs):
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return lhs / rhs


def check_duality(f, g, alpha, p, q, bank=None):
    """``<f, g>`` against ``||f||_{B^alpha_{p,q}} ||g||_{B^-alpha_{p',q'}}``."""
    bank = _bank_for(f, bank)
    lhs = lattice.inner_product(f, g)
    rhs = (besov_norm(f, BesovSpec(alpha, p, q), bank)
           * besov_norm(g, BesovSpec(-alpha, conjugate(p), conjugate(q)), bank))
    return InequalityCheck(lhs, rhs, _ratio(lhs, rhs))


@dataclass
class DualityStudy:
    constant: float
    holdout_max: float
    passed: bool


def _duality_ratios(corpus, alpha, p, q, bank):
    # each field against itself (near-extremal) and against its neighbour
    n = len(corpus)
    return [abs(check_duality(corpus[i], corpus[j], alpha, p, q, bank).ratio)
            for i in range(n) for j in (i, (i + 1) % n)]


def duality_study(train, holdout, alpha, p, q, bank=None, margin=1.1):
    """Fit ``C = margin * max ratio`` on ``train`` and test it on ``holdout``."""
    if not train or not holdout:
        raise ParameterError("both corpora must be non-empty")
    bank = _bank_for(train[0], bank)
    C = margin * max(_duality_ratios(train, alpha, p, q, bank))
    worst = max(_duality_ratios(holdout, alpha, p, q, bank))
    return DualityStudy(C, worst, bool(worst <= C))


def kernel_difference_term(f, kernel):
    """``sum_{x,y} eps^4 K_gamma(x - y) eps^-1 gamma |f(x) - f(y)|``."""
    di, dj, w = kernel.offsets()
    v = f.values
    total = 0.0
    for a, b, c in zip(di, dj, w):
        total += c * np.abs(np.roll(v, (int(a), int(b)), axis=(0, 1)) - v).sum()
    return kernel.epsilon * kernel.gamma * total


def check_regularity_bound(f, kernel, nu, bank=None):
    """``||f||_{B^nu_{1,1}(Lambda_eps)}`` against ``||f||_1^{1-2nu} D^{2nu} + ||f||_1``.

    ``D`` is :func:`kernel_difference_term`.
    """
    if not 0 < nu < 0.5:
        raise ParameterError(f"nu must lie in (0, 1/2), got {nu}")
    if f.N != kernel.N:
        raise ParameterError("field and kernel live on different lattices")
    lhs = besov_norm(f, BesovSpec(nu, 1, 1), bank)
    l1 = lattice.lp_norm(f, 1)
    D = kernel_difference_term(f, kernel)
    rhs = l1 ** (1 - 2 * nu) * D ** (2 * nu) + l1
    return InequalityCheck(lhs, rhs, _ratio(lhs, rhs))


def nearest_neighbour_energy(f):
    """``sum_{|x-y| = eps} eps^2 (f(y) - f(x))^2`` over ordered pairs."""
    v = f.values
    e = sum(((np.roll(v, s, axis=a) - v) ** 2).sum() for a in range(f.d) for s in (1, -1))
    return float(e * f.epsilon ** f.d)


def check_lp_extension_bound(f, p, kappa=0.1, refine=4):
    """``||Ext f||_{L^p(T^2)}`` against the gradient-corrected discrete bound.

    ``rhs = ||f||_p + eps^-kappa ||f||_{2p-2}^{1-1/p} E^{1/(2p)}`` with ``E`` the
    nearest-neighbour energy.
    """
    lhs = lattice.lp_norm(lattice.refine(f, refine), p)
    eps = f.epsilon
    rhs = (lattice.lp_norm(f, p) + eps ** -kappa * lattice.lp_norm(f, 2 * p - 2) ** (1 - 1 / p)
           * nearest_neighbour_energy(f) ** (1 / (2 * p)))
    return InequalityCheck(lhs, rhs, _ratio(lhs, rhs))


def check_lp_log_bound(f, p, refine=4):
    """``||Ext f||_{L^p(T^2)}`` against ``log^2(1/eps) ||f||_{L^p(Lambda_eps)}``."""
    lhs = lattice.lp_norm(lattice.refine(f, refine), p)
    rhs = math.log(f.N) ** 2 * lattice.lp_norm(f, p) if f.N > 1 else lattice.lp_norm(f, p)
    return InequalityCheck(lhs, rhs, _ratio(lhs, rhs))


def check_negative_besov_embedding(f, nu, p, bank=None):
    """``||f||_{B^-nu_{inf,inf}}`` against ``||f||_{L^p}`` for ``p >= d/nu``."""
    if nu <= 0 or p < f.d / nu:
        raise ParameterError(f"need nu > 0 and p >= d/nu, got nu={nu}, p={p}")
    lhs = besov_norm(f, BesovSpec(-nu, math.inf, math.inf), bank)
    rhs = lattice.lp_norm(f, p)
    return InequalityCheck(lhs, rhs, _ratio(lhs, rhs))


def check_product(f, g, alpha, beta, p, q, bank=None):
    """Exploratory: ``||fg||_{B^beta}`` against ``||f||_{B^alpha} ||g||_{B^beta}``; not asserted."""
    if not beta < 0 < alpha:
        raise ParameterError("need beta < 0 < alpha")
    bank = _bank_for(f, bank)
    lhs = besov_norm(f * g, BesovSpec(beta, p, q), bank)
    rhs = besov_norm(f, BesovSpec(alpha, p, q), bank) * besov_norm(g, BesovSpec(beta, p, q), bank)
    return InequalityCheck(lhs, rhs, _ratio(lhs, rhs))


def field_corpus(N, n, seed=0, kinds=("smooth", "rough")):
    """``n`` random fields per kind on ``Lambda_eps``.

    ``smooth``: Gaussian modes with variance ``(1 + |w|^2)^-2``; ``rough``:
    independent standard normals per site.
    """
    rng = np.random.default_rng(seed)
    w2 = lattice.squared_frequency(N)
    out = []
    for kind in kinds:
        for _ in range(n):
            if kind == "smooth":
                noise = lattice.fft_forward(rng.standard_normal((2 * N, 2 * N)), N)
                out.append(TorusField.from_spectrum(noise / (1.0 + w2), N))
            elif kind == "rough":
                out.append(TorusField(rng.standard_normal((2 * N, 2 * N))))
            else:
                raise ParameterError(f"unknown corpus kind {kind!r}")
    return out


INEQUALITY_COLUMNS = ("inequality_id", "params", "lhs", "rhs", "ratio", "corpus_id")


def write_inequality_csv(path, rows):
    """Rows are ``(inequality_id, params, lhs, rhs, ratio, corpus_id)`` tuples."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(INEQUALITY_COLUMNS)
        for row in rows:
            ineq, params, lhs, rhs, ratio, corpus = row
            w.writerow([ineq, params, repr(float(lhs)), repr(float(rhs)), repr(float(ratio)), corpus])
