"""Chain and estimator diagnostics: autocorrelation, batch means, KS, bootstrap."""
from __future__ import annotations

import math

import numpy as np
from scipy import stats


def autocorrelation(x) -> np.ndarray:
    """Normalised autocorrelation function via FFT (zero-padded)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    f = np.fft.rfft(x - x.mean(), n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    if acf[0] == 0:
        out = np.zeros(n)
        out[0] = 1.0
        return out
    return acf / acf[0]


def integrated_autocorr_time(x, c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's self-consistent window.

    The window is the smallest ``M`` with ``M >= c * tau(M)``.  A constant
    series has ``tau = 1`` by convention.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 2 or np.ptp(x) == 0:
        return 1.0
    rho = autocorrelation(x)
    taus = 2.0 * np.cumsum(rho) - 1.0
    window = np.arange(taus.size) >= c * taus
    m = int(np.argmax(window)) if window.any() else taus.size - 1
    return float(max(taus[m], 1.0 / x.size))


def effective_sample_size(x) -> float:
    x = np.asarray(x, dtype=float)
    return min(float(x.size), x.size / integrated_autocorr_time(x))


def batch_means_se(x, batches: int | None = None) -> float:
    """Standard error of the mean of a correlated series by non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if batches is None:
        batches = max(2, int(math.sqrt(n)))
    batches = min(batches, n)
    size = n // batches
    if batches < 2 or size < 1:
        return math.inf
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


def ks_distance(sample, cdf, cdf_left=None) -> float:
    """Sup distance between the empirical CDF of ``sample`` and ``cdf``.

    ``cdf_left`` gives left limits for distributions with atoms; when omitted the
    target is taken to be continuous.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    if cdf_left is None:
        return float(stats.kstest(x, cdf).statistic)
    # empirical right/left limits at each distinct point
    uniq, first = np.unique(x, return_index=True)
    last = np.append(first[1:], n)
    f_right = np.asarray(cdf(uniq), dtype=float)
    f_left = np.asarray(cdf_left(uniq), dtype=float)
    d_right = np.abs(last / n - f_right)
    d_left = np.abs(first / n - f_left)
    return float(max(d_right.max(), d_left.max()))


def bootstrap_ci(groups, statistic, *, n_boot: int = 2000, level: float = 0.95, seed: int = 0):
    """Percentile bootstrap interval, resampling whole groups (e.g. replicas).

    ``groups`` is a sequence of arrays; ``statistic`` maps a list of groups to
    a float.  Returns ``(low, high, draws)``.
    """
    rng = np.random.default_rng(seed)
    k = len(groups)
    draws = np.empty(n_boot)
    for i in range(n_boot):
        pick = rng.integers(0, k, size=k)
        draws[i] = statistic([groups[j] for j in pick])
    alpha = 0.5 * (1.0 - level)
    lo, hi = np.quantile(draws, [alpha, 1.0 - alpha])
    return float(lo), float(hi), draws
