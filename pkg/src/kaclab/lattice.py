"""Periodic lattice geometry and discrete Fourier analysis.

The macroscopic torus is ``[-1, 1]^d`` discretised by ``Lambda_eps = eps * Lambda_N``
with ``Lambda_N = {1-N, ..., N}^d`` and ``eps = 1/N``.  Arrays indexed by
``Lambda_N`` are stored in *natural order*: array index ``i`` along an axis holds
the site (or frequency) ``i - (N - 1)``.

Conventions (no hidden normalisation)::

    fhat(w) = sum_x eps^d f(x) exp(-i pi w.x)
    f(x)    = 2^-d sum_w fhat(w) exp(i pi w.x)

The frequency ``w_j = N`` is its own Hermitian partner modulo ``2N``.  Off the
lattice it is evaluated as ``cos(pi N x_j)``, which is the real trigonometric
interpolant with the Nyquist coefficient split evenly between ``+N`` and ``-N``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DimensionError, ParameterError

SNAPSHOT_MAGIC = b"KPL2"
SNAPSHOT_VERSION = 1


def axis_coordinates(N):
    """Integer coordinates ``1-N, ..., N`` in natural order."""
    return np.arange(1 - N, N + 1)


def site_grid(N, d=2):
    """Integer coordinate arrays of ``Lambda_N``, one per axis, shape ``(2N,)*d``."""
    k = axis_coordinates(N)
    return np.meshgrid(*([k] * d), indexing="ij")


def squared_frequency(N, d=2):
    """``|w|^2`` over ``Lambda_N`` in natural order."""
    return sum(w.astype(float) ** 2 for w in site_grid(N, d))


def to_fft_order(a, N, d=2):
    """Roll natural-order data so that coordinate 0 sits at index 0."""
    return np.roll(a, -(N - 1), axis=tuple(range(-d, 0)))


def from_fft_order(a, N, d=2):
    return np.roll(a, N - 1, axis=tuple(range(-d, 0)))


def fft_forward(values, N, d=2):
    """Spectrum of natural-order ``values`` over the last ``d`` axes."""
    axes = tuple(range(-d, 0))
    F = np.fft.fftn(to_fft_order(values, N, d), axes=axes)
    return from_fft_order(F, N, d) * (1.0 / N) ** d


def fft_inverse(spectrum, N, d=2, real=True):
    """Values from a natural-order spectrum; inverse of :func:`fft_forward`."""
    axes = tuple(range(-d, 0))
    G = to_fft_order(spectrum, N, d)
    v = from_fft_order(np.fft.ifftn(G, axes=axes), N, d) * float(N) ** d
    return v.real if real else v


def apply_multiplier(values, multiplier_fft, d=2):
    """Apply a Fourier multiplier given in FFT order.

    Translation-invariant, so ``values`` may be in any cyclic ordering.
    """
    axes = tuple(range(-d, 0))
    return np.fft.ifftn(np.fft.fftn(values, axes=axes) * multiplier_fft, axes=axes).real


def resample_spectrum(spectrum, N, N_new, d=2):
    """Move a natural-order spectrum from ``Lambda_N`` to ``Lambda_{N_new}``.

    Refining splits each Nyquist coefficient evenly between ``+N`` and ``-N``;
    coarsening truncates to ``|w_j| <= N_new`` and folds ``-N_new`` onto ``+N_new``.
    In both directions the represented real function is preserved on the
    coarser of the two lattices.
    """
    out = np.asarray(spectrum)
    for ax in range(out.ndim - d, out.ndim):
        out = _resample_axis(out, N, N_new, ax)
    return out


def _resample_axis(a, N, M, ax):
    a = np.moveaxis(a, ax, -1)
    shape = a.shape[:-1] + (2 * M,)
    out = np.zeros(shape, dtype=np.result_type(a.dtype, np.complex128))
    if M == N:
        out[...] = a
    elif M > N:
        # frequencies 1-N..N-1 move unchanged; the Nyquist column N is split
        out[..., M - N:M + N - 1] = a[..., :2 * N - 1]
        out[..., M + N - 1] += 0.5 * a[..., 2 * N - 1]
        out[..., M - N - 1] += 0.5 * a[..., 2 * N - 1]
    else:
        # keep -M..M, fold -M onto +M
        out[..., :] = a[..., N - M:N + M]
        out[..., 2 * M - 1] += a[..., N - M - 1]
    return np.moveaxis(out, -1, ax)


@dataclass(frozen=True, eq=False)
class TorusField:
    """Real field on ``Lambda_eps`` with a lazily computed spectrum.

    ``values`` has shape ``(2N,)*d`` in natural order.  The spectrum is computed
    once on first access; recomputation gives identical results, so concurrent
    readers are harmless.
    """

    values: np.ndarray

    def __post_init__(self):
        # read-only view: the caller's array stays writable
        v = np.asarray(self.values, dtype=float).view()
        if v.ndim == 0 or v.shape[0] % 2 or any(s != v.shape[0] for s in v.shape):
            raise DimensionError(f"field must be a (2N,)*d array, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_spectrum(cls, spectrum, N=None):
        spectrum = np.asarray(spectrum)
        N = N or spectrum.shape[0] // 2
        f = cls(fft_inverse(spectrum, N, spectrum.ndim))
        f.__dict__["spectrum"] = spectrum
        return f

    @classmethod
    def from_function(cls, func, N, d=2):
        """Sample ``func(x_1, ..., x_d)`` on the lattice points ``eps * k``."""
        coords = [k / N for k in site_grid(N, d)]
        return cls(np.broadcast_to(func(*coords), (2 * N,) * d).astype(float))

    @classmethod
    def constant(cls, c, N, d=2):
        return cls(np.full((2 * N,) * d, float(c)))

    @property
    def N(self):
        return self.values.shape[0] // 2

    @property
    def d(self):
        return self.values.ndim

    @property
    def epsilon(self):
        return 1.0 / self.N

    @cached_property
    def spectrum(self):
        s = fft_forward(self.values, self.N, self.d)
        s.setflags(write=False)
        return s

    def coordinates(self):
        return [k / self.N for k in site_grid(self.N, self.d)]

    def __add__(self, other):
        _check_same(self, other)
        return TorusField(self.values + other.values)

    def __sub__(self, other):
        _check_same(self, other)
        return TorusField(self.values - other.values)

    def __neg__(self):
        return TorusField(-self.values)

    def __mul__(self, c):
        if isinstance(c, TorusField):
            _check_same(self, c)
            return TorusField(self.values * c.values)
        return TorusField(self.values * float(c))

    __rmul__ = __mul__


def _check_same(f, g):
    if f.values.shape != g.values.shape:
        raise DimensionError(f"lattice mismatch: {f.values.shape} vs {g.values.shape}")


def fourier_forward(f):
    """``fhat(w) = sum_x eps^d f(x) e^{-i pi w.x}`` over ``Lambda_N``."""
    return np.array(f.spectrum)


def fourier_inverse(spectrum, N=None):
    """Field whose spectrum is ``spectrum`` (imaginary round-off discarded)."""
    return TorusField.from_spectrum(spectrum, N)


def _basis(N, x):
    """Per-point 1-D basis ``e^{i pi w x}`` with the Nyquist column as a cosine."""
    w = axis_coordinates(N)
    B = np.exp(1j * np.pi * np.multiply.outer(x, w))
    B[..., -1] = np.cos(np.pi * N * x)
    return B


def extend_evaluate(f, x):
    """Evaluate the trigonometric extension of ``f`` at points ``x`` of the torus.

    Parameters
    ----------
    f : TorusField
    x : array_like, shape ``(..., d)``
        Points of ``[-1, 1]^d`` (any real coordinates are reduced periodically).

    Returns
    -------
    ndarray of shape ``x.shape[:-1]``; agrees with ``f.values`` on lattice points.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != f.d:
        raise DimensionError(f"points have dimension {x.shape[-1]}, field has {f.d}")
    lead = x.shape[:-1]
    pts = x.reshape(-1, f.d)
    T = np.einsum("pa,a...->p...", _basis(f.N, pts[:, 0]), f.spectrum)
    for j in range(1, f.d):
        T = np.einsum("pa,pa...->p...", _basis(f.N, pts[:, j]), T)
    return (T.real / 2.0 ** f.d).reshape(lead)


def refine(f, factor):
    """Restriction of ``Ext(f)`` to the lattice ``Lambda_{eps/factor}``."""
    if int(factor) != factor or factor < 1:
        raise ParameterError("refinement factor must be a positive integer")
    factor = int(factor)
    if factor == 1:
        return f
    spec = resample_spectrum(f.spectrum, f.N, f.N * factor, f.d)
    return TorusField.from_spectrum(spec, f.N * factor)


def lp_norm(f, p):
    """Discrete ``L^p(Lambda_eps)`` norm ``(sum eps^d |f|^p)^(1/p)``."""
    v = np.abs(f.values)
    if p == math.inf:
        return float(v.max())
    if p < 1:
        raise ParameterError(f"p must be >= 1 or inf, got {p}")
    return float(np.sum(v ** p) * f.epsilon ** f.d) ** (1.0 / p)


def inner_product(f, g):
    """``<f, g> = sum_x eps^d f(x) g(x)``."""
    _check_same(f, g)
    return float(np.sum(f.values * g.values) * f.epsilon ** f.d)


def convolve(f, g):
    """``(f*g)(x) = sum_y eps^d f(x-y) g(y)``, computed as ``fhat * ghat``."""
    _check_same(f, g)
    return TorusField.from_spectrum(f.spectrum * g.spectrum, f.N)


def write_snapshot(path, field):
    """Write a 2-D field as ``KPL2 | u32 version | u32 N | 4N^2 float64`` (little endian)."""
    if field.d != 2:
        raise DimensionError("snapshots are defined for d = 2 only")
    with open(path, "wb") as fh:
        fh.write(snapshot_bytes(field))


def snapshot_bytes(field):
    header = SNAPSHOT_MAGIC + struct.pack("<II", SNAPSHOT_VERSION, field.N)
    return header + np.ascontiguousarray(field.values, dtype="<f8").tobytes()


def read_snapshot(path, with_trailer=False):
    """Read a snapshot file; optionally return any bytes after the field payload."""
    data = Path(path).read_bytes()
    if data[:4] != SNAPSHOT_MAGIC:
        raise ConfigurationError(f"{path}: bad snapshot magic {data[:4]!r}")
    version, N = struct.unpack("<II", data[4:12])
    if version != SNAPSHOT_VERSION:
        raise ConfigurationError(f"{path}: unsupported snapshot version {version}")
    n = 4 * N * N
    payload = data[12:12 + 8 * n]
    if len(payload) != 8 * n:
        raise ConfigurationError(f"{path}: truncated snapshot")
    field = TorusField(np.frombuffer(payload, dtype="<f8").reshape(2 * N, 2 * N).copy())
    if with_trailer:
        return field, data[12 + 8 * n:]
    return field
