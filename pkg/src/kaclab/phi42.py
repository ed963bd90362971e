"""Galerkin sampler for the dynamical Phi^4_2 equation.

The solution is split as ``X = Z + e^{t Delta} X0 + V``: ``Z`` solves the
stochastic heat equation ``dZ = Delta Z dt + sqrt(2) dW`` from zero and is
advanced exactly mode by mode; ``V`` solves

    dV/dt = Delta V + sum_n a_n(t) H_n(X, c(t))

with ``a_n(t)`` the coefficients rewritten from variance ``c_inf`` to the
current variance ``c(t)`` of ``Z``.  Fields live on the ``2M x 2M`` grid of
``Lambda_eps`` with ``eps = 1/M`` (natural order) and may carry leading batch axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.fft import next_fast_len

from . import lattice
from .errors import ConfigurationError, ParameterError
from .hermite import coefficient_shift, hermite

PI2 = math.pi ** 2


def _eigen(M):
    """``pi^2 |w|^2`` over ``Lambda_M`` in natural order."""
    return PI2 * lattice.squared_frequency(M)


@lru_cache(maxsize=None)
def _half_eigen(M):
    """``pi^2 |w|^2`` on the real-FFT half spectrum, shape ``(2M, M+1)``."""
    k0 = np.fft.fftfreq(2 * M, 1.0 / (2 * M))
    k1 = np.arange(M + 1)
    lam = PI2 * (k0[:, None] ** 2 + k1[None, :] ** 2)
    lam.setflags(write=False)
    return lam


def renorm_c(t, M):
    """``c(t) = sum_{w != 0} (1 - e^{-2 t pi^2 |w|^2}) / (4 pi^2 |w|^2)`` over ``Lambda_M``."""
    if t < 0:
        raise ParameterError("t must be nonnegative")
    lam = _eigen(M)
    lam = lam[lam > 0]
    return math.fsum((-np.expm1(-2.0 * t * lam) / (4.0 * lam)).tolist())


def renorm_c_inf(M):
    """``c_inf = sum_{w != 0} 1 / (4 pi^2 |w|^2)`` over ``Lambda_M``."""
    lam = _eigen(M)
    lam = lam[lam > 0]
    return math.fsum((1.0 / (4.0 * lam)).tolist())


def _phi1(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-5
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z / 2.0 + z * z / 6.0, np.expm1(zs) / zs)


def _phi2(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    series = 0.5 + z / 6.0 + z * z / 24.0 + z ** 3 / 120.0
    return np.where(small, series, (np.expm1(zs) - zs) / (zs * zs))


def dealias_size(M, degree):
    """Half-size ``P`` of a padded grid on which degree-``degree`` products of
    fields band-limited to ``Lambda_M`` do not alias back into ``Lambda_M``."""
    need = (degree + 1) * M + 2
    L = next_fast_len(need, real=True)
    while L % 2:
        L = next_fast_len(L + 1, real=True)
    return L // 2


# Spectra below are real-FFT half spectra of fields stored with the origin at
# index 0, in numpy's unnormalised convention: S = rfft2(u), u = irfft2(S).
# The lattice transform of the field is eps^2 S.

def _to_half(u):
    return sfft.rfft2(lattice.to_fft_order(u, u.shape[-1] // 2))


def _from_half(S, M):
    return lattice.from_fft_order(sfft.irfft2(S, s=(2 * M, 2 * M)), M)


def _pad(S, M, P):
    """Zero-pad a half spectrum from ``Lambda_M`` to ``Lambda_P``, splitting Nyquist rows/columns."""
    out = np.zeros(S.shape[:-2] + (2 * P, P + 1), dtype=complex)
    out[..., :M, :M] = S[..., :M, :M]
    out[..., 2 * P - M + 1:, :M] = S[..., M + 1:, :M]
    out[..., M, :M] += 0.5 * S[..., M, :M]
    out[..., 2 * P - M, :M] += 0.5 * S[..., M, :M]
    # Nyquist column: the implicit conjugate column carries the other half
    col = np.zeros(S.shape[:-2] + (2 * P,), dtype=complex)
    col[..., :M] = S[..., :M, M]
    col[..., 2 * P - M + 1:] = S[..., M + 1:, M]
    col[..., M] += 0.5 * S[..., M, M]
    col[..., 2 * P - M] += 0.5 * S[..., M, M]
    out[..., :, M] = 0.5 * col
    return out * (P / M) ** 2


def _truncate(S, P, M):
    """Project a half spectrum on ``Lambda_P`` to ``Lambda_M``, folding ``-M`` onto ``+M``."""
    full_rows = np.concatenate([S[..., :M + 1, :], S[..., 2 * P - M + 1:, :]], axis=-2)
    full_rows[..., M, :] += S[..., 2 * P - M, :]
    out = full_rows[..., :, :M + 1].copy()
    # column -M is the conjugate of column +M at the negated row
    neg = np.conj(full_rows[..., (-np.arange(2 * M)) % (2 * M), M])
    out[..., :, M] += neg
    return out * (M / P) ** 2


@dataclass
class Phi42State:
    """Decomposed state at local time ``t`` since the last restart.

    ``Z_spec``, ``V_spec`` and ``X0_spec`` are real-FFT half spectra (see
    :func:`_to_half`) with leading batch axes, so Hermitian symmetry holds by
    construction.  ``mode_var`` tracks the point-variance contribution of each
    mode of ``Z`` and ``c_t`` is their sum.
    """

    M: int
    t: float
    Z_spec: np.ndarray
    V_spec: np.ndarray
    X0_spec: np.ndarray
    coeffs: dict
    c_inf: float
    c_t: float
    mode_var: np.ndarray
    noise: bool = True
    t_total: float = 0.0

    @property
    def epsilon(self):
        return 1.0 / self.M

    @property
    def Z(self):
        return _from_half(self.Z_spec, self.M)

    @property
    def V(self):
        return _from_half(self.V_spec, self.M)

    @property
    def X0(self):
        return _from_half(self.X0_spec, self.M)

    @property
    def Z_hat(self):
        """Lattice transform of ``Z`` over ``Lambda_M``, natural order."""
        return lattice.fft_forward(self.Z, self.M)

    def heat_X0_spec(self, t=None):
        t = self.t if t is None else t
        if t == 0:
            return self.X0_spec
        return self.X0_spec * np.exp(-_half_eigen(self.M) * t)

    def heat_X0(self, t=None):
        """``e^{t Delta} X0``."""
        return _from_half(self.heat_X0_spec(t), self.M)

    def field_spec(self):
        return self.Z_spec + self.heat_X0_spec() + self.V_spec

    def field(self):
        """``X = Z + e^{t Delta} X0 + V`` on the lattice, natural order."""
        return _from_half(self.field_spec(), self.M)

    def current_coeffs(self):
        return coefficient_shift(self.coeffs, self.c_inf, self.c_t)

    def copy(self):
        return replace(self, Z_spec=self.Z_spec.copy(), V_spec=self.V_spec.copy(),
                       X0_spec=self.X0_spec.copy(), coeffs=dict(self.coeffs),
                       mode_var=self.mode_var.copy())


def phi4_coefficients(A):
    """``a_1 = A``, ``a_3 = -1/3``."""
    return {1: float(A), 3: -1.0 / 3.0}


def initial_state(M, coeffs=None, X0=None, batch=(), noise=True):
    """State at ``t = 0`` with ``Z = V = 0``; ``X0`` (natural order) defaults to zero."""
    M = int(M)
    if M < 1:
        raise ConfigurationError("M must be positive")
    shape = tuple(batch) + (2 * M, 2 * M)
    X0 = np.zeros(shape) if X0 is None else np.broadcast_to(np.asarray(X0, dtype=float), shape)
    X0s = _to_half(np.array(X0))
    coeffs = phi4_coefficients(0.0) if coeffs is None else dict(coeffs)
    return Phi42State(M=M, t=0.0, Z_spec=np.zeros_like(X0s), V_spec=np.zeros_like(X0s),
                      X0_spec=X0s, coeffs=coeffs, c_inf=renorm_c_inf(M) if noise else 0.0,
                      c_t=0.0, mode_var=np.zeros((2 * M, 2 * M)), noise=noise)


def ou_step(state, dt, rng):
    """Exact transition of ``Z`` over ``dt``, in place.

    Mode ``w != 0``: ``Zhat <- e^{-lam dt} Zhat + sqrt(8 (1 - e^{-2 lam dt}) / (2 lam)) xi``;
    zero mode: ``Zhat <- Zhat + sqrt(8 dt) xi``; ``lam = pi^2 |w|^2`` and ``xi``
    Hermitian noise with ``E|xi(w)|^2 = 1``.  The factor 8 makes the point
    variance of ``Z`` equal ``c(t)`` on nonzero modes and ``t/2`` on the zero mode.
    """
    if dt <= 0:
        raise ParameterError("dt must be positive")
    M = state.M
    lam = _half_eigen(M)
    state.Z_spec = state.Z_spec * np.exp(-lam * dt)
    if state.noise:
        amp = _noise_amplitude(M, dt)
        # rfft2 of N(0,1) sites has E|.|^2 = (2M)^2; unit lattice modes need eps^-2 / 2 more
        eta = rng.standard_normal(state.Z_spec.shape[:-2] + (2 * M, 2 * M))
        state.Z_spec = state.Z_spec + amp * sfft.rfft2(eta) * (M / 2.0)
        lam_n = _eigen(M)
        nz = lam_n > 0
        state.mode_var[nz] = (np.exp(-2.0 * lam_n[nz] * dt) * state.mode_var[nz]
                              - np.expm1(-2.0 * lam_n[nz] * dt) / (4.0 * lam_n[nz]))
        state.c_t = float(np.sum(state.mode_var))
    state.t += dt
    state.t_total += dt
    return state


@lru_cache(maxsize=64)
def _noise_amplitude(M, dt):
    lam = _half_eigen(M)
    safe = np.where(lam > 0, lam, 1.0)
    var = np.where(lam > 0, 8.0 * -np.expm1(-2.0 * safe * dt) / (2.0 * safe), 8.0 * dt)
    return np.sqrt(var)


def polynomial_drift_spec(S, coeffs, c, M):
    """Galerkin projection of ``sum_n a_n H_n(X, c)`` for ``X`` with half spectrum ``S``.

    Products are formed on a padded grid large enough that no alias reaches ``Lambda_M``.
    """
    active = {n: a for n, a in coeffs.items() if a != 0}
    if not active:
        return np.zeros_like(S)
    deg = max(active)
    P = dealias_size(M, deg) if deg > 1 else M
    Xp = sfft.irfft2(_pad(S, M, P) if P != M else S, s=(2 * P, 2 * P))
    Fp = np.zeros_like(Xp)
    for n, a in active.items():
        Fp += a * hermite(n, Xp, c)
    F = sfft.rfft2(Fp)
    return _truncate(F, P, M) if P != M else F


def polynomial_drift(X, coeffs, c, M):
    """Field-space wrapper of :func:`polynomial_drift_spec` (natural order)."""
    return _from_half(polynomial_drift_spec(_to_half(np.asarray(X, dtype=float)), coeffs, c, M), M)


def drift_spec(state, V_spec=None):
    """``F(t, V) = sum_n a_n(t) H_n(Z + e^{t Delta} X0 + V, c_t)`` as a half spectrum."""
    V_spec = state.V_spec if V_spec is None else V_spec
    S = state.Z_spec + state.heat_X0_spec() + V_spec
    return polynomial_drift_spec(S, state.current_coeffs(), state.c_t, state.M)


def drift(state):
    return _from_half(drift_spec(state), state.M)


@lru_cache(maxsize=64)
def _etd_factors(M, dt):
    z = -_half_eigen(M) * dt
    return np.exp(z), _phi1(z), _phi2(z)


def dpd_step(state, dt, rng=None, scheme="euler"):
    """Advance ``(Z, V)`` by ``dt``, in place.

    ``scheme="euler"``: ``V <- e^{dt Delta} (V + dt F(t, V))`` (first order).
    ``scheme="etd2"``: second-order exponential Runge-Kutta (ETD2RK), which
    uses ``F`` at both ends of the step.  ``Z`` is advanced by :func:`ou_step`.
    """
    if dt <= 0:
        raise ParameterError("dt must be positive")
    E, p1, p2 = _etd_factors(state.M, dt)
    F0 = drift_spec(state)
    if scheme == "euler":
        ou_step(state, dt, rng)
        state.V_spec = E * (state.V_spec + dt * F0)
    elif scheme == "etd2":
        pred = E * state.V_spec + dt * p1 * F0
        ou_step(state, dt, rng)
        F1 = drift_spec(state, pred)
        state.V_spec = pred + dt * p2 * (F1 - F0)
    else:
        raise ConfigurationError(f"unknown scheme {scheme!r}")
    return state


def restart(state):
    """Fold the current field into ``X0`` and reset ``Z = V = 0``, ``t = 0``."""
    state.X0_spec = state.field_spec()
    state.Z_spec = np.zeros_like(state.Z_spec)
    state.V_spec = np.zeros_like(state.V_spec)
    state.t = 0.0
    state.c_t = 0.0
    state.mode_var[...] = 0.0
    return state


@dataclass
class Phi42Config:
    """Run description.

    ``nonlinear=False`` drops every drift term (free field); ``noise=False``
    also forces ``c_t = c_inf = 0``.  ``restart_interval`` bounds the local
    time between restarts so that the zero mode of ``Z`` stays small.
    """

    M: int = 16
    A: float = 0.0
    dt: float = 0.005
    T_burn: float = 1.0
    T_sample: float = 10.0
    cadence: float = 0.1
    X0: float | np.ndarray | None = None
    batch: int = 1
    noise: bool = True
    nonlinear: bool = True
    scheme: str = "euler"
    restart_interval: float = 10.0
    coeffs: dict | None = field(default=None)

    def __post_init__(self):
        if self.dt <= 0 or self.cadence <= 0:
            raise ConfigurationError("dt and cadence must be positive")
        if self.T_burn < 0 or self.T_sample < 0:
            raise ConfigurationError("T_burn and T_sample must be nonnegative")
        if self.restart_interval <= 0:
            raise ConfigurationError("restart_interval must be positive")

    def drift_coeffs(self):
        if not self.nonlinear:
            return {}
        return dict(self.coeffs) if self.coeffs is not None else phi4_coefficients(self.A)


@dataclass
class Phi42Run:
    times: np.ndarray
    observables: dict
    final: Phi42State


def advance(state, duration, dt, rng, scheme="euler", restart_interval=math.inf):
    """Take ``round(duration/dt)`` steps of size ``dt`` with periodic restarts."""
    n = int(round(duration / dt))
    for _ in range(n):
        if state.t + 0.5 * dt >= restart_interval:
            restart(state)
        dpd_step(state, dt, rng, scheme)
    return state


def run_phi42(config, rng, observables=None):
    """Burn in for ``T_burn``, then record observables every ``cadence`` for ``T_sample``.

    ``observables`` maps names to callables of the field array ``X`` (shape
    ``(batch, 2M, 2M)``); by default the full field is stored under ``"X"``.
    Times are measured from the end of burn-in.
    """
    if observables is None:
        observables = {"X": lambda X: X.copy()}
    st = initial_state(config.M, config.drift_coeffs(), config.X0, (config.batch,), config.noise)
    advance(st, config.T_burn, config.dt, rng, config.scheme, config.restart_interval)
    n_rec = int(round(config.T_sample / config.cadence))
    times, rec = [], {k: [] for k in observables}
    for i in range(n_rec + 1):
        if i:
            advance(st, config.cadence, config.dt, rng, config.scheme, config.restart_interval)
        X = st.field()
        times.append(i * config.cadence)
        for k, fn in observables.items():
            rec[k].append(fn(X))
    return Phi42Run(np.array(times), {k: np.array(v) for k, v in rec.items()}, st)
