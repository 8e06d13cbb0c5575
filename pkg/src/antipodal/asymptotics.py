"""Closed-form large-n predictions, all evaluated in log space.

The common prefactor ``2^{beta n(n-1)/2} (8 pi/(beta n))^{(n-1)/2} sqrt(n) e^{-1/(2 beta)}``
overflows a double near n = 50, so it only ever appears through its logarithm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError
from .importance import LemmaIntegralSpec
from .model import LOG_2, TWO_PI, ModelParams
from .testfunc import TestFunction

CIRCLE_POINTS = 2**14


@dataclass(frozen=True)
class AsymptoticPrediction:
    """A predicted log value plus the supremum of the admissible error exponent.

    ``claimed_error_exponent`` is metadata: the relative error is claimed to be
    O(n^-zeta) for every zeta below it (``0.0`` means only o(1) is claimed).
    """

    log_value: float
    claimed_error_exponent: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


def log_circle_average(h, points: int = CIRCLE_POINTS) -> float:
    """``log((1/2pi) int_{-pi}^{pi} exp(h(theta)) dtheta)`` by the periodic trapezoid rule."""
    theta = -math.pi + TWO_PI * (np.arange(points) + 1.0) / points
    vals = np.asarray(h(theta), dtype=float)
    if vals.ndim == 0:
        return float(vals)
    return float(logsumexp(vals) - math.log(points))


def log_circle_average_with_error(h, points: int = CIRCLE_POINTS) -> tuple[float, float]:
    """As ``log_circle_average`` plus the change on refining the grid twofold."""
    fine = log_circle_average(h, points)
    return fine, abs(log_circle_average(h, 2 * points) - fine)


def _log_prefactor(n: int, beta: float) -> float:
    return (beta * 0.5 * n * (n - 1) * LOG_2
            + 0.5 * (n - 1) * math.log(8.0 * math.pi / (beta * n))
            + 0.5 * math.log(n)
            - 0.5 / beta)


def predict_log_Zn(params: ModelParams) -> AsymptoticPrediction:
    if params.n < 2:
        raise DomainError("the Z_n asymptotics need n >= 2")
    return AsymptoticPrediction(_log_prefactor(params.n, params.beta) + math.log(TWO_PI), 1.0)


def predict_log_I(params: ModelParams, g: TestFunction, t: float) -> AsymptoticPrediction:
    """Prediction for ``log I((t/n) g)``; equals ``predict_log_Zn`` exactly at ``t = 0``."""
    base = predict_log_Zn(params)
    if t == 0:
        return AsymptoticPrediction(base.log_value, base.claimed_error_exponent)
    shift = log_circle_average(lambda th: t * g(th))
    return AsymptoticPrediction(base.log_value + shift, 0.5 * g.hoelder_exponent)


def predict_log_mgf_leading(g: TestFunction, t: float) -> float:
    if t == 0:
        return 0.0
    return log_circle_average(lambda th: t * g(th))


def predict_mgf_leading(g: TestFunction, t: float) -> float:
    """``(1/2pi) int exp(t g(theta)) dtheta``, the limit of ``E exp((t/n) sum g)``."""
    return math.exp(predict_log_mgf_leading(g, t))


def predict_log_mgf_conjecture(params: ModelParams, g: TestFunction, t: float) -> float:
    if not g.is_fourier:
        raise DomainError("the sqrt(n)-scale prediction needs a C^1 test function (Fourier variant)")
    if t == 0:
        return 0.0
    dg = g.derivative_function()
    scale = t * math.sqrt(params.n)
    var_term = 2.0 * t * t / params.beta
    return log_circle_average(lambda th: scale * g(th) + var_term * dg(th) ** 2)


def predict_mgf_conjecture(params: ModelParams, g: TestFunction, t: float) -> float:
    """``(1/2pi) int exp(t sqrt(n) g + 2 g'^2 t^2 / beta) dtheta``.

    Overflows to ``inf`` for huge ``t sqrt(n)``; use the ``log`` variant there.
    """
    lv = predict_log_mgf_conjecture(params, g, t)
    return math.exp(lv) if lv < 709.0 else math.inf


def predict_log_mgf_sqrt_n_plain(params: ModelParams, g: TestFunction, t: float) -> float:
    """The derivative-free alternative ``log((1/2pi) int exp(t sqrt(n) g))``."""
    if t == 0:
        return 0.0
    scale = t * math.sqrt(params.n)
    return log_circle_average(lambda th: scale * g(th))


def predict_log_lemma_J(spec: LemmaIntegralSpec) -> AsymptoticPrediction:
    n, a = spec.n, spec.a
    lv = (0.5 * math.log(n) + 0.5 * (n - 1) * math.log(math.pi / (a * n))
          + 1.5 * spec.b / (a * a) + spec.c**2 / (4.0 * a))
    exponent = 1.0 - 8.0 * spec.epsilon if spec.c == 0 else 0.0
    return AsymptoticPrediction(lv, exponent)
