"""Error bars for correlated time series and two-sample comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sstats

from ..errors import ParameterError


def autocorrelation(x):
    """Normalised autocorrelation function via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    y = x - x.mean()
    f = np.fft.rfft(y, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    if acf[0] == 0:
        return np.concatenate([[1.0], np.zeros(n - 1)])
    return acf / acf[0]


def integrated_autocorrelation_time(x, c=5.0):
    """``tau_int = 1/2 + sum_{t>=1} rho(t)`` with the self-consistent window ``W >= c tau``."""
    rho = autocorrelation(x)
    tau = 0.5
    for w in range(1, rho.size):
        tau += rho[w]
        if w >= c * tau:
            break
    return max(tau, 0.5)


@dataclass
class BatchMeans:
    mean: float
    stderr: float
    batch_length: int
    n_batches: int
    tau_int: float


def batch_means(x, batch_length=None, min_batches=10):
    """Mean and standard error from non-overlapping batch means.

    The default batch length is ``ceil(4 tau_int)`` (at least 1), reduced if
    fewer than ``min_batches`` batches would remain.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        raise ParameterError("need at least two samples")
    tau = integrated_autocorrelation_time(x)
    if batch_length is None:
        batch_length = max(1, int(math.ceil(4.0 * tau)))
        batch_length = max(1, min(batch_length, n // min_batches))
    nb = n // batch_length
    if nb < 2:
        raise ParameterError("too few samples for two batches")
    means = x[:nb * batch_length].reshape(nb, batch_length).mean(axis=1)
    se = float(means.std(ddof=1) / math.sqrt(nb))
    return BatchMeans(float(x.mean()), se, batch_length, nb, tau)


@dataclass
class MomentRow:
    order: int
    value_a: float
    stderr_a: float
    value_b: float
    stderr_b: float

    @property
    def z(self):
        s = math.hypot(self.stderr_a, self.stderr_b)
        return abs(self.value_a - self.value_b) / s if s > 0 else (0.0 if self.value_a == self.value_b else math.inf)


@dataclass
class Comparison:
    ks: float
    pvalue: float
    moments: list


def compare_distributions(a, b, orders=(1, 2, 3, 4), min_samples=100):
    """Two-sample Kolmogorov-Smirnov statistic and raw moments with batch-means errors.

    Sample order is taken as time order for the error bars.
    """
    a, b = np.asarray(a, dtype=float).ravel(), np.asarray(b, dtype=float).ravel()
    if a.size < min_samples or b.size < min_samples:
        raise ParameterError(f"need at least {min_samples} samples each, got {a.size} and {b.size}")
    res = sstats.ks_2samp(a, b)
    rows = []
    for k in orders:
        ma, mb = batch_means(a ** k), batch_means(b ** k)
        rows.append(MomentRow(k, ma.mean, ma.stderr, mb.mean, mb.stderr))
    return Comparison(float(res.statistic), float(res.pvalue), rows)


def ks_critical_value(n, m, alpha=0.01):
    """Asymptotic two-sample KS critical value ``c(alpha) sqrt((n+m)/(n m))``."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def linear_fit(x, y):
    """Least squares ``y = a + b x``; returns ``(a, b, R^2)``."""
    r = sstats.linregress(np.asarray(x, float), np.asarray(y, float))
    return float(r.intercept), float(r.slope), float(r.rvalue ** 2)
