"""Named test functions on the torus and pairings with lattice fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import lattice
from ..errors import ParameterError
from ..lattice import TorusField


def _bump(x1, x2, radius=0.6):
    r2 = (x1 * x1 + x2 * x2) / radius ** 2
    out = np.zeros(np.broadcast(x1, x2).shape)
    inside = r2 < 1
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


TEST_FUNCTIONS = {
    "const": lambda x1, x2: np.ones(np.broadcast(x1, x2).shape),
    # real parts of e_w for w = (1,0), (0,1), (1,1)
    "cos10": lambda x1, x2: np.cos(np.pi * x1) + 0 * x2,
    "sin10": lambda x1, x2: np.sin(np.pi * x1) + 0 * x2,
    "cos01": lambda x1, x2: np.cos(np.pi * x2) + 0 * x1,
    "cos11": lambda x1, x2: np.cos(np.pi * (x1 + x2)),
    "bump": _bump,
}


def test_function(name, N):
    """Sample a named test function on ``Lambda_eps``, ``eps = 1/N``."""
    try:
        fn = TEST_FUNCTIONS[name]
    except KeyError:
        raise ParameterError(f"unknown test function {name!r}; known: {sorted(TEST_FUNCTIONS)}") from None
    return TorusField.from_function(fn, N)


def pair_with_test_function(field, phi):
    """``<field, phi>_{Lambda_eps}``; ``phi`` may be a TorusField or a registry name."""
    if isinstance(phi, str):
        phi = test_function(phi, field.N)
    return lattice.inner_product(field, phi)


@dataclass
class SpinPairing:
    spin: float
    smoothed: float

    @property
    def difference(self):
        return self.spin - self.smoothed


def compare_spin_pairing(spins, kernel, phi):
    """``<gamma^-1 sigma, phi>`` against ``<X_gamma, phi>`` (kernel-smoothed spins).

    The two differ by ``gamma^-1 <sigma, phi - K * phi>``, of order ``gamma``
    for smooth ``phi``.
    """
    g = kernel.gamma
    N = kernel.N
    if isinstance(phi, str):
        phi = test_function(phi, N)
    s = np.asarray(spins, dtype=float)
    h = lattice.apply_multiplier(s, kernel.spectrum_fft)
    return SpinPairing(pair_with_test_function(TorusField(s / g), phi),
                       pair_with_test_function(TorusField(h / g), phi))
