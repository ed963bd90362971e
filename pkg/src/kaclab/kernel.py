"""Kac interaction kernel, its Fourier symbol and the renormalisation constant."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import lattice
from .errors import ConfigurationError, DegenerateKernelError, ProfileError
from .lattice import TorusField

SUPPORT_RADIUS = 3.0


@dataclass(frozen=True)
class Profile:
    """Radial shape function on ``[0, 3]``, zero beyond.

    ``c2`` declares whether the function is twice differentiable as a map of
    ``x in R^2`` (including the support edge).
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    c2: bool = True

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= SUPPORT_RADIUS, self.func(np.minimum(r, SUPPORT_RADIUS)), 0.0)

    def second_moment(self):
        """``int K(|x|) |x|^2 dx / int K(|x|) dx`` over the plane."""
        from scipy.integrate import quad
        num = quad(lambda r: self.func(r) * r ** 3, 0, SUPPORT_RADIUS)[0]
        den = quad(lambda r: self.func(r) * r, 0, SUPPORT_RADIUS)[0]
        return num / den


def _bump(r):
    return (1.0 - (r / 3.0) ** 2) ** 3


def _moment4(r):
    u = (r / 3.0) ** 2
    return u * u * (1.0 + 2.0 * u / 3.0) * (1.0 - u) ** 3


def _flat(r):
    return np.ones_like(r)


PROFILES = {
    # (1 - (r/3)^2)^3: smooth polynomial bump, second moment 9/5
    "bump": Profile("bump", _bump),
    # u^2 (1 + 2u/3)(1 - u)^3 with u = (r/3)^2: second moment exactly 4, so that
    # gamma^-2 (K_gamma * f - f) tends to the Laplacian of the torus
    "moment4": Profile("moment4", _moment4),
    # indicator of the ball; not C^2, only for tests
    "flat": Profile("flat", _flat, c2=False),
}
DEFAULT_PROFILE = "bump"


def get_profile(profile):
    if isinstance(profile, Profile):
        return profile
    try:
        return PROFILES[profile]
    except KeyError:
        raise ProfileError(f"unknown profile {profile!r}; known: {sorted(PROFILES)}") from None


def _check_profile(prof, allow_nonsmooth):
    r = np.linspace(0.0, SUPPORT_RADIUS, 3001)
    vals = np.asarray(prof.func(r), dtype=float)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ProfileError(f"profile {prof.name!r} takes negative or non-finite values")
    if not prof.c2 and not allow_nonsmooth:
        raise ProfileError(f"profile {prof.name!r} is not twice differentiable")
    if prof.c2:
        # C^2 at the edge requires K, K' and K'' to vanish at r = 3
        h = 1e-3
        edge = np.asarray(prof.func(np.array([3.0 - 2 * h, 3.0 - h, 3.0])), dtype=float)
        scale = max(1.0, float(vals.max()))
        if abs(edge[2]) > 1e-9 * scale or abs(edge[2] - edge[1]) > 1e-5 * scale:
            raise ProfileError(f"profile {prof.name!r} does not vanish smoothly at r = 3")


@dataclass(frozen=True, eq=False)
class KacKernel:
    """Sampled Kac kernel on ``Lambda_N``.

    ``kappa`` is the microscopic kernel in natural order (``kappa[N-1, N-1]`` is
    the origin).  ``spectrum`` is the real symbol ``Khat(w) = sum_z kappa(z)
    e^{-i pi w.z / N}`` in natural order.
    """

    gamma: float
    N: int
    kappa: np.ndarray
    profile: str = DEFAULT_PROFILE
    periodized: bool = False
    spectrum: np.ndarray = field(default=None, repr=False)
    c_gamma: float = field(default=None)

    def __post_init__(self):
        if self.spectrum is None:
            spec = lattice.fft_forward(self.kappa, self.N) * self.N ** 2
            object.__setattr__(self, "spectrum", np.ascontiguousarray(spec.real))
        if self.c_gamma is None:
            try:
                c = renorm_constant(self)
            except DegenerateKernelError:
                c = math.nan
            object.__setattr__(self, "c_gamma", c)

    @property
    def epsilon(self):
        return 1.0 / self.N

    @property
    def macroscopic(self):
        """``K_gamma(x) = eps^-2 kappa(x / eps)`` as a field on ``Lambda_eps``."""
        return TorusField(self.kappa * self.N ** 2)

    @property
    def spectrum_fft(self):
        return lattice.to_fft_order(self.spectrum, self.N)

    def offsets(self):
        """Nonzero entries as ``(di, dj, weight)`` arrays of lattice displacements."""
        idx = np.nonzero(self.kappa)
        k = lattice.axis_coordinates(self.N)
        return k[idx[0]], k[idx[1]], self.kappa[idx]

    def laplacian_symbol(self):
        """Eigenvalues of ``Delta_gamma f = eps^-2 gamma^2 (K * f - f)``, natural order."""
        return self.N ** 2 * self.gamma ** 2 * (self.spectrum - 1.0)


def build_kernel(profile=DEFAULT_PROFILE, gamma=0.25, N=16, periodize=False,
                 allow_nonsmooth=False):
    """Construct ``kappa_gamma(x) = gamma^2 K(gamma |x|) / Z`` on ``Lambda_N``.

    ``|x|`` is the length of the minimal periodic representative and ``Z`` the
    exact lattice normaliser, so ``sum kappa = 1`` and ``kappa(0) = 0``.

    With ``periodize=True`` the kernel is summed over all periodic images, which
    is the only sensible meaning when the support ``3/gamma`` does not fit in the
    torus (e.g. critical scaling at ``gamma = 1/2``).  When it does fit, the two
    constructions coincide.
    """
    prof = get_profile(profile)
    _check_profile(prof, allow_nonsmooth)
    if not 0.0 < gamma < 1.0:
        raise ConfigurationError(f"gamma must lie in (0, 1), got {gamma}")
    N = int(N)
    if N < 1:
        raise ConfigurationError("N must be positive")
    R = SUPPORT_RADIUS / gamma
    if R >= N and not periodize:
        raise ConfigurationError(
            f"kernel support 3/gamma = {R:g} does not fit in Lambda_N (N = {N})")

    K1, K2 = lattice.site_grid(N)
    w = np.zeros((2 * N, 2 * N))
    n_img = int(math.ceil(R / (2 * N))) + 1 if periodize else 0
    for n1 in range(-n_img, n_img + 1):
        for n2 in range(-n_img, n_img + 1):
            r = np.hypot(K1 + 2 * N * n1, K2 + 2 * N * n2)
            w += gamma ** 2 * prof(gamma * r)
    w[N - 1, N - 1] = 0.0
    Z = math.fsum(w.ravel())
    if Z <= 0:
        raise ProfileError(f"profile {prof.name!r} gives zero lattice mass at gamma = {gamma}")
    kappa = w / Z
    return KacKernel(gamma=float(gamma), N=N, kappa=kappa, profile=prof.name, periodized=periodize)


def renorm_constant(k):
    """``C_gamma = 1/4 sum_{w != 0} Khat(w)^2 / (eps^-2 gamma^2 (1 - Khat(w)))``.

    The prefactor uses the kernel's own ``eps = 1/N``; under critical scaling
    ``eps = gamma^2`` it equals ``gamma^-2``.
    """
    spec = np.asarray(k.spectrum, dtype=float)
    mask = np.ones(spec.shape, dtype=bool)
    mask[k.N - 1, k.N - 1] = False
    gap = 1.0 - spec[mask]
    if np.any(gap <= 1e-14):
        raise DegenerateKernelError("kernel symbol equals 1 at a nonzero frequency")
    pref = k.N ** 2 * k.gamma ** 2
    return 0.25 * math.fsum((spec[mask] ** 2 / (pref * gap)).tolist())


@dataclass
class KernelBoundsReport:
    gamma: float
    N: int
    upper_C: float
    lower_c: float
    max_abs_symbol: float
    anisotropy: float
    passed: bool


def verify_kernel_bounds(k):
    """Fit the constants of ``|Khat| <= 1 ^ C gamma^-2/|w|^2`` and ``1 - Khat >= c (|gamma w|^2 ^ 1)``.

    ``upper_C`` is the smallest admissible ``C`` and ``lower_c`` the largest
    admissible ``c`` (``w = 0`` excluded).  ``anisotropy`` is the largest relative
    spread of ``Khat`` among frequencies of (nearly) equal length with
    ``|w| <= 1/gamma``; it is recorded only.
    """
    w2 = lattice.squared_frequency(k.N)
    spec = k.spectrum
    nz = w2 > 0
    g2 = k.gamma ** 2
    max_abs = float(np.abs(spec).max())
    upper = float(np.max(np.abs(spec[nz]) * g2 * w2[nz]))
    lower = float(np.min((1.0 - spec[nz]) / np.minimum(g2 * w2[nz], 1.0)))
    return KernelBoundsReport(
        gamma=k.gamma, N=k.N, upper_C=upper, lower_c=lower, max_abs_symbol=max_abs,
        anisotropy=_anisotropy(spec, w2, k.gamma),
        passed=bool(lower > 0 and np.isfinite(upper) and max_abs <= 1.0 + 1e-12),
    )


def _anisotropy(spec, w2, gamma):
    sel = (w2 > 0) & (w2 <= gamma ** -2)
    if not sel.any():
        return 0.0
    r = np.round(np.sqrt(w2[sel]), 0)
    vals = spec[sel]
    worst = 0.0
    for radius in np.unique(r):
        v = vals[r == radius]
        if v.size > 1:
            worst = max(worst, float((v.max() - v.min()) / max(abs(v.mean()), 1e-12)))
    return worst


def dump_kernel(k, path):
    """Write ``K_gamma`` as a field snapshot plus a ``.txt`` sidecar record."""
    from pathlib import Path
    path = Path(path)
    lattice.write_snapshot(path, k.macroscopic)
    sidecar = path.with_suffix(path.suffix + ".txt")
    sidecar.write_text(
        f"profile {k.profile}\ngamma {k.gamma:.17g}\nN {k.N}\nC_gamma {k.c_gamma:.17g}\n")
    return sidecar
