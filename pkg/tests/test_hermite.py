import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kaclab.errors import ParameterError
from kaclab.hermite import (coefficient_shift, hermite, hermite_all, hermite_coefficients,
                            shifted_wick_powers, wick_recombine)

reals = st.floats(-3, 3, allow_nan=False)
variances = st.floats(0, 2, allow_nan=False)


def test_low_degrees():
    x, c = 1.7, 0.4
    assert hermite(0, x, c) == 1.0
    assert hermite(1, x, c) == x
    assert hermite(2, x, c) == pytest.approx(x * x - c)
    assert hermite(3, x, c) == pytest.approx(x ** 3 - 3 * c * x)
    assert hermite(4, x, c) == pytest.approx(x ** 4 - 6 * c * x ** 2 + 3 * c * c)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 5), reals, variances)
def test_recurrence_matches_coefficients(n, x, c):
    coef = hermite_coefficients(n, c)
    direct = sum(a * x ** k for k, a in enumerate(coef))
    assert hermite(n, x, c) == pytest.approx(direct, abs=1e-9)


def test_all_matches_single():
    x = np.linspace(-2, 2, 7)
    hs = hermite_all(5, x, 0.3)
    for n in range(6):
        assert np.allclose(hs[n], hermite(n, x, 0.3))


def test_orthogonal_under_gaussian():
    c = 0.7
    z, w = np.polynomial.hermite_e.hermegauss(30)
    x = math.sqrt(c) * z
    w = w / w.sum()
    for m in range(6):
        for n in range(6):
            val = np.sum(w * hermite(m, x, c) * hermite(n, x, c))
            expect = math.factorial(n) * c ** n if m == n else 0.0
            assert val == pytest.approx(expect, abs=1e-10)


def test_zero_variance_is_monomial():
    assert hermite(5, 1.3, 0.0) == pytest.approx(1.3 ** 5)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 5), reals, reals, variances)
def test_binomial_identity(n, a, b, c):
    coef = wick_recombine(n, b)
    lhs = hermite(n, a + b, c)
    rhs = sum(coef[j] * hermite(j, a, c) for j in range(n + 1))
    assert lhs == pytest.approx(rhs, abs=1e-8 * (1 + abs(lhs)))


def test_shifted_wick_powers():
    a, s, c = np.array([0.2, -1.1]), 0.5, 0.8
    got = shifted_wick_powers(s, hermite_all(4, a, c))
    for j in range(5):
        assert np.allclose(got[j], hermite(j, a + s, c))


@settings(max_examples=50, deadline=None)
@given(reals, variances, variances, st.floats(-2, 2))
def test_coefficient_shift_preserves_polynomial(x, c_inf, c_t, A):
    coeffs = {1: A, 3: -1.0 / 3.0}
    shifted = coefficient_shift(coeffs, c_inf, c_t)
    lhs = sum(a * hermite(n, x, c_inf) for n, a in coeffs.items())
    rhs = sum(a * hermite(n, x, c_t) for n, a in shifted.items())
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_coefficient_shift_identity_when_equal():
    out = coefficient_shift({1: 0.5, 3: -1 / 3}, 0.2, 0.2)
    assert out[3] == -1 / 3 and out[1] == pytest.approx(0.5)


@pytest.mark.parametrize("n", [-1, 6, 2.5])
def test_degree_out_of_range(n):
    with pytest.raises(ParameterError):
        hermite(n, 0.0, 1.0)
