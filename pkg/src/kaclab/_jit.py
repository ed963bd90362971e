"""Compiled event loops for the Glauber chain."""

import math

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def advance(spins, field, off_i, off_j, off_w, beta, b, frozen,
            dts, sites, us, pos, t_ring, t_stop, max_events,
            accumulate, t_last, int_tanh, int_field,
            rec_a, rec_b, rec_out, rec_pos):
    """Process pending rings with time ``<= t_stop`` from the random buffer.

    Ring ``pos`` occurs at ``t_ring + dts[pos]``.  Stops when the buffer is
    exhausted, ``max_events`` rings were processed, or the next ring lies after
    ``t_stop``; the pending ring is never consumed, so the trajectory does not
    depend on where the caller stops.

    When ``accumulate`` is set, ``int_tanh`` and ``int_field`` receive the time
    integrals of ``tanh(beta h + b)`` and ``h`` per site, lazily flushed from
    ``t_last`` whenever a site's field changes.

    When ``rec_a >= 0`` the product ``spins[rec_a] * spins[rec_b]`` (flat
    indices) just before each ring is written to ``rec_out``.
    """
    L = spins.shape[0]
    n_events = 0
    n_flips = 0
    n_off = off_w.shape[0]
    while pos < dts.shape[0] and n_events < max_events:
        t_next = t_ring + dts[pos]
        if t_next > t_stop:
            break
        t_ring = t_next
        s = sites[pos]
        if rec_a >= 0:
            rec_out[rec_pos] = spins[rec_a // L, rec_a % L] * spins[rec_b // L, rec_b % L]
            rec_pos += 1
        zi = s // L
        zj = s - zi * L
        sigma = spins[zi, zj]
        if frozen:
            rate = 0.0
        else:
            rate = 0.5 * (1.0 - sigma * math.tanh(beta * field[zi, zj] + b))
        if us[pos] < rate:
            delta = -2.0 * sigma
            for o in range(n_off):
                xi = zi + off_i[o]
                xj = zj + off_j[o]
                if xi < 0:
                    xi += L
                elif xi >= L:
                    xi -= L
                if xj < 0:
                    xj += L
                elif xj >= L:
                    xj -= L
                h = field[xi, xj]
                if accumulate:
                    dt = t_ring - t_last[xi, xj]
                    int_tanh[xi, xj] += math.tanh(beta * h + b) * dt
                    int_field[xi, xj] += h * dt
                    t_last[xi, xj] = t_ring
                field[xi, xj] = h + delta * off_w[o]
            spins[zi, zj] = -sigma
            n_flips += 1
        pos += 1
        n_events += 1
    return pos, t_ring, n_events, n_flips, rec_pos


@numba.njit(cache=True, nogil=True)
def flush(field, beta, b, t, t_last, int_tanh, int_field):
    """Bring all lazy time integrals up to time ``t``."""
    L = field.shape[0]
    for i in range(L):
        for j in range(L):
            dt = t - t_last[i, j]
            h = field[i, j]
            int_tanh[i, j] += math.tanh(beta * h + b) * dt
            int_field[i, j] += h * dt
            t_last[i, j] = t


def empty_accumulators():
    z = np.zeros((1, 1))
    return z, z.copy(), z.copy()
