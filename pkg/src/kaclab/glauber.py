"""Continuous-time Glauber dynamics of the Ising-Kac model.

A single global exponential clock of rate ``|Lambda_N|`` picks a uniform site,
which flips with probability ``c(z, sigma) = (1 - sigma_z tanh(beta h(z) + b)) / 2``.
This is equivalent in law to independent rate-one clocks on every site.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import _jit, lattice
from .errors import ConfigurationError, ParameterError
from .hermite import hermite
from .lattice import TorusField

REFRESH_EVERY = 1_000_000
BUFFER_SIZE = 1 << 16


@dataclass
class DynamicsParams:
    """Inverse temperature, field and the space/time/amplitude scalings.

    ``X(t, x) = delta^-1 h(t / alpha, x / epsilon)``.
    """

    beta: float
    b: float = 0.0
    A: float = 0.0
    alpha: float = 1.0
    delta: float = 1.0
    epsilon: float = 1.0

    @classmethod
    def critical(cls, kernel, A=0.0, b=0.0):
        """``delta = gamma``, ``alpha = gamma^2``, ``beta = 1 + alpha (C_gamma + A)``.

        ``epsilon`` is the lattice spacing ``1/N`` of the kernel, which equals
        ``gamma^2`` only when ``N = gamma^-2`` exactly; see :attr:`epsilon_mismatch`.
        """
        g = kernel.gamma
        return cls(beta=1.0 + g * g * (kernel.c_gamma + A), b=b, A=A,
                   alpha=g * g, delta=g, epsilon=kernel.epsilon)

    @property
    def epsilon_mismatch(self):
        return self.epsilon - self.delta ** 2


def rate_formula(sigma, h, beta, b=0.0):
    """Flip probability ``(1 - sigma tanh(beta h + b)) / 2`` (vectorised)."""
    return 0.5 * (1.0 - sigma * np.tanh(beta * h + b))


def local_field(spins, kernel):
    """``h(x) = sum_z kappa(x - z) sigma_z`` by FFT convolution."""
    return lattice.apply_multiplier(spins.astype(float), kernel.spectrum_fft)


class GlauberChain:
    """Spin configuration, cached local field and clock of one trajectory.

    Parameters
    ----------
    kernel : KacKernel
    params : DynamicsParams
    spins : array of +-1, optional
        Initial configuration in natural order; independent fair coins if omitted.
    seed : int, SeedSequence or Generator
    """

    def __init__(self, kernel, params, spins=None, seed=None, frozen=False):
        self.kernel = kernel
        self.params = params
        self.N = kernel.N
        self.gamma = kernel.gamma
        self.frozen = frozen
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        L = 2 * self.N
        if spins is None:
            spins = np.where(self.rng.random((L, L)) < 0.5, 1, -1)
        spins = np.asarray(spins)
        if spins.shape != (L, L) or not np.all(np.abs(spins) == 1):
            raise ConfigurationError(f"spins must be a ({L}, {L}) array of +-1")
        self.spins = spins.astype(np.int8)
        self.local_field = local_field(self.spins, kernel)
        off_i, off_j, off_w = kernel.offsets()
        self._off = (off_i.astype(np.int64), off_j.astype(np.int64), off_w.astype(float))
        self.t_micro = 0.0
        self._t_ring = 0.0
        self.flips = 0
        self.events = 0
        self._flips_since_refresh = 0
        self.max_refresh_drift = 0.0
        self._fill_buffer()

    @property
    def n_sites(self):
        return self.spins.size

    @property
    def t_macro(self):
        return self.params.alpha * self.t_micro

    def _fill_buffer(self):
        self._buffer_state = self.rng.bit_generator.state
        n = BUFFER_SIZE
        self._dts = self.rng.exponential(1.0 / self.n_sites, n)
        self._sites = self.rng.integers(0, self.n_sites, n, dtype=np.int64)
        self._us = self.rng.random(n)
        self._pos = 0

    def copy(self, seed=None):
        """Independent replica with the same state and a fresh random stream."""
        other = GlauberChain.__new__(GlauberChain)
        other.__dict__.update(self.__dict__)
        other.spins = self.spins.copy()
        other.local_field = self.local_field.copy()
        other.rng = np.random.default_rng(seed)
        other._fill_buffer()
        return other

    def flip_rate(self, z):
        """Flip probability at array index ``z = (i, j)``."""
        if self.frozen:
            return 0.0
        p = self.params
        return float(rate_formula(self.spins[z], self.local_field[z], p.beta, p.b))

    def refresh_local_field(self):
        """Recompute ``h`` from scratch; returns the drift of the incremental copy."""
        fresh = local_field(self.spins, self.kernel)
        drift = float(np.abs(fresh - self.local_field).max())
        self.local_field = fresh
        self._flips_since_refresh = 0
        self.max_refresh_drift = max(self.max_refresh_drift, drift)
        return drift

    def _advance(self, t_stop, max_events, acc=None, record=None):
        p = self.params
        if acc is None:
            t_last, i_tanh, i_field = _jit.empty_accumulators()
        else:
            t_last, i_tanh, i_field = acc
        if record is None:
            rec_a, rec_b, rec_out, rec_pos = -1, -1, np.zeros(1), 0
        else:
            rec_a, rec_b, rec_out, rec_pos = record
        done = 0
        while done < max_events:
            if self._pos >= self._dts.shape[0]:
                self._fill_buffer()
            budget = min(max_events - done, REFRESH_EVERY - self._flips_since_refresh + 1)
            pos, t_ring, n_ev, n_fl, rec_pos = _jit.advance(
                self.spins, self.local_field, *self._off, p.beta, p.b, self.frozen,
                self._dts, self._sites, self._us, self._pos, self._t_ring, t_stop, budget,
                acc is not None, t_last, i_tanh, i_field, rec_a, rec_b, rec_out, rec_pos)
            self._pos, self._t_ring = pos, t_ring
            done += n_ev
            self.events += n_ev
            self.flips += n_fl
            self._flips_since_refresh += n_fl
            if self._flips_since_refresh >= REFRESH_EVERY:
                if acc is not None:
                    _jit.flush(self.local_field, p.beta, p.b, t_ring, t_last, i_tanh, i_field)
                self.refresh_local_field()
            if pos < self._dts.shape[0] and n_ev < budget:
                break  # next ring lies beyond t_stop
        return done, rec_pos

    def step(self):
        """Process exactly one ring of the global clock; returns its waiting time."""
        t0 = self._t_ring
        self._advance(math.inf, 1)
        self.t_micro = self._t_ring
        return self._t_ring - t0

    def run_events(self, n, record_pair=None):
        """Process ``n`` rings.

        ``record_pair=(a, b)`` with array indices returns the product
        ``sigma_a sigma_b`` observed just before each ring (by PASTA these are
        unbiased samples of the time-stationary law).
        """
        record = None
        if record_pair is not None:
            L = 2 * self.N
            a, b = (int(np.ravel_multi_index(z, (L, L))) for z in record_pair)
            record = (a, b, np.empty(n), 0)
        _, used = self._advance(math.inf, n, record=record)
        self.t_micro = self._t_ring
        if record is not None:
            return record[2][:used]
        return None

    def run_until(self, t_micro, acc=None):
        """Advance the clock to microscopic time ``t_micro``."""
        if t_micro < self.t_micro:
            raise ParameterError("cannot run backwards in time")
        self._advance(t_micro, math.inf if acc is None else 1 << 62, acc=acc)
        self.t_micro = t_micro

    def run_macro(self, duration):
        """Advance by ``duration`` units of macroscopic time."""
        self.run_until(self.t_micro + duration / self.params.alpha)

    def fluctuation_field(self):
        return fluctuation_field(self)

    def save_checkpoint(self, path):
        """Local-field snapshot + packed spin bits, with a JSON sidecar for the clock."""
        path = Path(path)
        with open(path, "wb") as fh:
            fh.write(lattice.snapshot_bytes(TorusField(self.local_field)))
            fh.write(np.packbits(self.spins.ravel() > 0).tobytes())
        meta = {
            "gamma": self.gamma, "N": self.N, "t_micro": self.t_micro, "t_ring": self._t_ring,
            "flips": self.flips, "events": self.events, "pos": self._pos,
            "buffer_state": self._buffer_state, "params": asdict(self.params),
            "frozen": self.frozen,
        }
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, default=int))

    @classmethod
    def load_checkpoint(cls, path, kernel):
        path = Path(path)
        field, trailer = lattice.read_snapshot(path, with_trailer=True)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        L = 2 * field.N
        bits = np.unpackbits(np.frombuffer(trailer, dtype=np.uint8))[:L * L]
        spins = np.where(bits.reshape(L, L) > 0, 1, -1)
        chain = cls(kernel, DynamicsParams(**meta["params"]), spins=spins, frozen=meta["frozen"])
        chain.local_field = np.array(field.values)
        chain.t_micro, chain._t_ring = meta["t_micro"], meta["t_ring"]
        chain.flips, chain.events = meta["flips"], meta["events"]
        chain.rng.bit_generator.state = meta["buffer_state"]
        chain._fill_buffer()
        chain._pos = meta["pos"]
        return chain


def step(chain):
    """One ring of the global clock, in place; returns ``(chain, dt_micro)``."""
    dt = chain.step()
    return chain, dt


def flip_rate(chain, z):
    return chain.flip_rate(z)


def fluctuation_field(chain):
    """``X(x) = delta^-1 h(x / eps)`` on ``Lambda_eps``; macroscopic time is ``chain.t_macro``."""
    return TorusField(chain.local_field / chain.params.delta)


def centered_spin_field(chain, m):
    """``gamma^-1 (sigma - m)`` on ``Lambda_eps``."""
    return TorusField((chain.spins - float(m)) / chain.gamma)


def drift_field(X, params, kernel):
    """Exact compensator of ``X``: ``alpha^-1 delta^-1 (K * tanh(beta delta X + b) - delta X)``.

    Under critical scaling this is ``gamma^-2 (K * gamma^-1 tanh(beta gamma X) - X)``.
    """
    d = params.delta
    t = np.tanh(params.beta * d * X.values + params.b)
    conv = lattice.apply_multiplier(t, kernel.spectrum_fft)
    return TorusField((conv - d * X.values) / (params.alpha * d))


def expanded_drift(X, params, kernel):
    """Third-order expansion ``Delta_gamma X - H_3(X, C_gamma)/3 + A X`` (diagnostic)."""
    lap = lattice.apply_multiplier(X.values, lattice.to_fft_order(kernel.laplacian_symbol(), kernel.N))
    v = X.values
    return TorusField(lap - (v ** 3 - 3.0 * kernel.c_gamma * v) / 3.0 + params.A * v)


def wick_observable(Z, j, c):
    """Pointwise ``H_j(Z(x), c)`` for ``j in {1, 2, 3}``."""
    if j not in (1, 2, 3):
        raise ParameterError(f"Wick observable defined for j in 1..3, got {j}")
    if c < 0:
        raise ParameterError("variance parameter must be nonnegative")
    return TorusField(hermite(j, Z.values, c))


@dataclass
class CosimSample:
    t: float
    Z: TorusField
    X: TorusField


def cosimulate_linearization(chain, window, duration, sample_times=None, Z0=None):
    """Co-simulate ``Z = int Delta_gamma Z ds + M`` alongside the chain.

    Within each window ``Z`` receives the martingale increment of ``X``
    (its jumps minus the time integral of :func:`drift_field`, exact because
    ``X`` is constant between rings), then the window's heat semigroup
    ``exp(w Delta_gamma)`` is applied spectrally.  This Lie splitting has error
    ``O(window)``.

    Parameters
    ----------
    chain : GlauberChain
        Advanced in place; macroscopic time is measured from its current state.
    window : float
        Macroscopic splitting step.
    duration : float
        Macroscopic time span.
    sample_times : sequence of float, optional
        Relative macroscopic times at which ``(Z, X)`` are returned; window
        boundaries are aligned to them.  Defaults to ``[duration]``.
    Z0 : TorusField, optional
        Initial value (default zero).
    """
    if window <= 0:
        raise ConfigurationError("window must be positive")
    k, p = chain.kernel, chain.params
    N = chain.N
    times = sorted(set([float(duration)] if sample_times is None else map(float, sample_times)))
    n_grid = int(math.ceil(duration / window - 1e-9))
    grid = sorted(set([min(i * window, duration) for i in range(1, n_grid + 1)] + times))
    lam = lattice.to_fft_order(k.laplacian_symbol(), N)
    semigroups = {}

    L = 2 * N
    Z = np.zeros((L, L)) if Z0 is None else np.array(Z0.values, dtype=float)
    t_last, i_tanh, i_field = np.zeros((L, L)), np.zeros((L, L)), np.zeros((L, L))
    start_micro = chain.t_micro
    out = []
    prev = 0.0
    wanted = set(times)
    for s in grid:
        w = s - prev
        if w <= 0:
            continue
        t0 = chain.t_micro
        t_last.fill(t0)
        i_tanh.fill(0.0)
        i_field.fill(0.0)
        h0 = chain.local_field.copy()
        t1 = start_micro + s / p.alpha
        chain.run_until(t1, acc=(t_last, i_tanh, i_field))
        if not chain.frozen:
            _jit.flush(chain.local_field, p.beta, p.b, t1, t_last, i_tanh, i_field)
            conv = lattice.apply_multiplier(i_tanh, k.spectrum_fft)
            dM = (chain.local_field - h0 - conv + i_field) / p.delta
            Z += dM
        key = round(w, 15)
        if key not in semigroups:
            semigroups[key] = np.exp(lam * w)
        Z = lattice.apply_multiplier(Z, semigroups[key])
        prev = s
        if s in wanted:
            out.append(CosimSample(s, TorusField(Z.copy()), fluctuation_field(chain)))
    return out
