"""The antipodal Gibbs measure on the circle and circular geometry helpers.

The unnormalised density of ``n`` angles is

    prod_{j<k} |exp(i t_j) + exp(i t_k)|**beta = prod_{j<k} (2 |cos((t_j - t_k)/2)|)**beta.

All partition-function scale quantities are handled as natural logarithms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .testfunc import TestFunction

TWO_PI = 2.0 * math.pi
LOG_2 = math.log(2.0)


@dataclass(frozen=True)
class ModelParams:
    n: int
    beta: float

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise DomainError(f"beta must be finite and > 0, got {self.beta!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "beta", float(self.beta))


def wrap_angle(x):
    """Map ``x`` to the representative of ``x mod 2*pi`` in (-pi, pi]."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("cannot wrap a non-finite angle")
    y = math.pi - np.remainder(math.pi - arr, TWO_PI)
    # remainder may round up to exactly 2*pi for tiny negative arguments
    y = np.where(y <= -math.pi, y + TWO_PI, y)
    # angles already in range are returned untouched (no rounding at the ends)
    y = np.where((arr > -math.pi) & (arr <= math.pi), arr, y)
    if np.ndim(x) == 0:
        return float(y)
    return y


def configuration(angles, params: ModelParams | None = None) -> np.ndarray:
    """Validate and canonicalise a configuration (a float array of wrapped angles)."""
    theta = wrap_angle(np.atleast_1d(np.asarray(angles, dtype=float)))
    if theta.ndim != 1:
        raise DomainError("a configuration is a one-dimensional array of angles")
    if params is not None and theta.size != params.n:
        raise DomainError(f"expected {params.n} angles, got {theta.size}")
    return theta


def pair_log_factor(diff):
    """``log(2|cos(diff/2)|)`` with exact antipodal pairs mapped to -inf."""
    diff = np.asarray(diff, dtype=float)
    c = np.abs(np.cos(0.5 * diff))
    c = np.where(np.abs(diff) == math.pi, 0.0, c)
    with np.errstate(divide="ignore"):
        return LOG_2 + np.log(c)


def log_weight(config, params: ModelParams) -> float:
    """Log of the unnormalised density, ``beta * sum_{j<k} log(2|cos((t_j-t_k)/2)|)``."""
    theta = np.asarray(config, dtype=float)
    if theta.shape != (params.n,):
        raise DomainError(f"expected {params.n} angles, got shape {theta.shape}")
    if params.n < 2:
        return 0.0
    j, k = np.triu_indices(params.n, 1)
    return float(params.beta * np.sum(pair_log_factor(theta[j] - theta[k])))


def linear_statistic(config, g: TestFunction):
    """``sum_j g(theta_j)``; a 2-D array of configurations gives one value per row."""
    return np.sum(g(np.asarray(config, dtype=float)), axis=-1)


def circular_mean(config, axis=-1):
    z = np.mean(np.exp(1j * np.asarray(config, dtype=float)), axis=axis)
    return np.angle(z)


def min_enclosing_arc(config) -> tuple[float, float]:
    """Centre and half-width of the smallest arc containing every angle.

    The arc is the complement of the largest circular gap between consecutive
    sorted angles.  Ties between equal largest gaps go to the smallest wrapped
    centre.
    """
    theta = np.sort(configuration(config))
    if theta.size == 1:
        return float(theta[0]), 0.0
    gaps = np.empty_like(theta)
    gaps[:-1] = np.diff(theta)
    gaps[-1] = theta[0] + TWO_PI - theta[-1]
    gmax = gaps.max()
    half_width = 0.5 * (TWO_PI - gmax)
    best = None
    for i in np.flatnonzero(gaps >= gmax - 1e-12):
        # the arc starts at the point right after gap i
        start = theta[(i + 1) % theta.size]
        hw = 0.5 * (TWO_PI - gaps[i])
        centre = wrap_angle(start + hw)
        if best is None or centre < best:
            best = centre
    return float(best), float(max(half_width, 0.0))


def is_clustered(config, radius: float) -> bool:
    """Is there a point of the circle within chord distance ``radius`` of every angle?"""
    if not (0.0 < radius <= 2.0):
        raise DomainError(f"chord radius must lie in (0, 2], got {radius}")
    _, half_width = min_enclosing_arc(config)
    return half_width <= 2.0 * math.asin(0.5 * radius)


def arc_half_widths(samples) -> np.ndarray:
    """Vectorised enclosing-arc half-width for a (count, n) array of configurations."""
    theta = np.sort(np.asarray(samples, dtype=float), axis=-1)
    gaps = np.diff(theta, axis=-1, append=theta[..., :1] + TWO_PI)
    return 0.5 * (TWO_PI - gaps.max(axis=-1))


def taylor_interaction_coeffs(beta: float) -> tuple[float, float]:
    """Quadratic and quartic coefficients of ``beta*log(2|cos(x/2)|)`` about ``x = 0``."""
    if not beta > 0:
        raise DomainError("beta must be > 0")
    return -beta / 8.0, -beta / 192.0
