"""Hermite polynomials with variance parameter and Wick recombination."""

from __future__ import annotations

from math import comb, factorial

import numpy as np

from .errors import ParameterError

MAX_DEGREE = 5


def hermite_coefficients(n, c):
    """Monomial coefficients of ``H_n(x, c)``, lowest degree first.

    ``H_n(x, c) = sum_k n! / (k! (n-2k)!) (-c/2)^k x^(n-2k)``, so that
    ``H_2 = x^2 - c`` and ``H_3 = x^3 - 3cx``.
    """
    _check_degree(n)
    coef = [0.0] * (n + 1)
    for k in range(n // 2 + 1):
        coef[n - 2 * k] = factorial(n) / (factorial(k) * factorial(n - 2 * k)) * (-c / 2.0) ** k
    return coef


def hermite(n, x, c):
    """``H_n(x, c)``, the Hermite polynomial orthogonal under ``N(0, c)``."""
    _check_degree(n)
    x = np.asarray(x, dtype=float)
    # three-term recurrence H_{k+1} = x H_k - k c H_{k-1}
    h_prev, h = np.ones_like(x), x
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    for k in range(1, n):
        h_prev, h = h, x * h - k * c * h_prev
    return h if h.ndim else float(h)


def hermite_all(n, x, c):
    """List ``[H_0(x,c), ..., H_n(x,c)]``."""
    _check_degree(n)
    x = np.asarray(x, dtype=float)
    out = [np.ones_like(x)]
    if n >= 1:
        out.append(x.copy())
    for k in range(1, n):
        out.append(x * out[k] - k * c * out[k - 1])
    return out


def wick_recombine(n, b, c=None):
    """Coefficients of ``H_n(a + b, c) = sum_j C(n, j) b^(n-j) H_j(a, c)``.

    Returns the list ``[C(n, j) b^(n-j) for j = 0..n]``; the identity holds for
    every ``c``, which is why ``c`` is accepted but unused.
    """
    _check_degree(n)
    b = np.asarray(b, dtype=float)
    return [comb(n, j) * b ** (n - j) for j in range(n + 1)]


def shifted_wick_powers(shift, powers):
    """Wick powers of ``a + shift`` from those of ``a``.

    ``powers[i] = H_i(a, c)``; returns ``[H_j(a + shift, c) for j < len(powers)]``.
    """
    out = []
    for j in range(len(powers)):
        coef = wick_recombine(j, shift)
        out.append(sum(coef[i] * powers[i] for i in range(j + 1)))
    return out


def coefficient_shift(coeffs, c_inf, c_t):
    """Rewrite ``sum_n a_n H_n(x, c_inf)`` as ``sum_n a_n(t) H_n(x, c_t)``.

    Parameters
    ----------
    coeffs : dict
        Degree -> coefficient (e.g. ``{1: A, 3: -1/3}``).
    c_inf, c_t : float

    Returns
    -------
    dict with the same keys plus any lower degrees produced by the shift.

    Uses ``H_n(x, c + d) = sum_k n! / (k! (n-2k)!) (-d/2)^k H_{n-2k}(x, c)``
    with ``d = c_inf - c_t``.
    """
    d = c_inf - c_t
    out = {}
    for n, a in coeffs.items():
        _check_degree(n)
        for k in range(n // 2 + 1):
            m = n - 2 * k
            out[m] = out.get(m, 0.0) + a * factorial(n) / (
                factorial(k) * factorial(m)) * (-d / 2.0) ** k
    return out


def _check_degree(n):
    if int(n) != n or not 0 <= n <= MAX_DEGREE:
        raise ParameterError(f"Hermite degree must be an integer in [0, {MAX_DEGREE}], got {n}")
