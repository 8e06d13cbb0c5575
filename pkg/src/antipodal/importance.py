"""Monte Carlo ground truth: importance sampling of log Z_n and the box integrals.

``importance_Z`` draws a uniform centre ``U`` and i.i.d. wrapped-normal offsets
of standard deviation ``2/sqrt(beta n)``.  Evaluating the marginal proposal
density of the angles would need an integral over ``U``; instead the centre is
kept as an auxiliary variable and paired with a backward kernel
``r(U | theta)`` (a wrapped normal of spread ``sd/sqrt(n)`` around the
circular mean).  Since ``r`` integrates to one in ``U`` the weight

    f(theta) r(U | theta) / [ (1/2pi) prod_j w(theta_j - U) ]

is unbiased for ``Z_n`` whatever ``r`` is; a good ``r`` only lowers variance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.special import logsumexp

from . import _kernels
from .errors import DiagnosticError, DomainError
from .estimate import EstimateWithError, LogMeanAccumulator
from .model import TWO_PI, ModelParams, wrap_angle

MIN_ESS = 10.0


def wrapped_normal_logpdf(x, sd: float):
    """Log density on (-pi, pi] of a zero-mean normal wrapped around the circle.

    Periodic images are summed out to ``|k| <= K`` with ``K`` chosen so the
    omitted tail is below ~1e-13 relative.
    """
    x = np.asarray(x, dtype=float)
    kmax = max(1, int(math.ceil((math.pi + 8.0 * sd) / TWO_PI)))
    flat = np.ascontiguousarray(x).ravel()
    return _kernels.wrapped_normal_logpdf_flat(flat, float(sd), kmax).reshape(x.shape)


def default_spread(params: ModelParams) -> float:
    return 2.0 / math.sqrt(params.beta * params.n)


def _importance_shard(params, count, rng, sd, chunk):
    n = params.n
    back_sd = sd / math.sqrt(n)
    acc = LogMeanAccumulator()
    done = 0
    while done < count:
        b = min(chunk, count - done)
        u = rng.uniform(-math.pi, math.pi, size=b)
        e = rng.normal(0.0, sd, size=(b, n))
        theta = wrap_angle(u[:, None] + e)
        log_f = _kernels.log_weight_rows(theta, params.beta)
        log_q = -math.log(TWO_PI) + wrapped_normal_logpdf(wrap_angle(e), sd).sum(axis=1)
        centre = np.angle(np.exp(1j * theta).mean(axis=1))
        log_r = wrapped_normal_logpdf(wrap_angle(u - centre), back_sd)
        acc.add(log_f + log_r - log_q)
        done += b
    return acc


def importance_Z(params: ModelParams, sample_count: int, seed: int, *, shards: int = 1,
                 spread: float | None = None, chunk: int = 4096) -> EstimateWithError:
    """Importance-sampling estimate of ``log Z_n`` with a delta-method standard error.

    Shards use independent generators spawned from ``seed`` and are merged in
    shard order, so the result depends only on ``(seed, shards)``.
    Raises ``DiagnosticError`` when the weight ESS falls below 10.
    """
    if params.n < 2:
        raise DomainError("importance sampling of Z_n needs n >= 2")
    if sample_count < 1000:
        raise DomainError("sample_count must be at least 1000")
    sd = default_spread(params) if spread is None else float(spread)
    counts = np.full(shards, sample_count // shards)
    counts[: sample_count % shards] += 1
    streams = np.random.SeedSequence(seed).spawn(shards)
    acc = LogMeanAccumulator()
    for c, ss in zip(counts, streams):
        acc = acc.merge(_importance_shard(params, int(c), np.random.default_rng(ss), sd, chunk))
    est = acc.estimate("delta", spread=sd, shards=shards)
    if acc.ess < MIN_ESS:
        raise DiagnosticError(f"importance weights degenerate (ESS = {acc.ess:.2f})", ess=acc.ess)
    return est


@dataclass(frozen=True)
class LemmaIntegralSpec:
    """Parameters of the truncated Gaussian-type box integral.

    The integrand is ``exp(-a S2 + b S4 + (c/sqrt(n)) sum_j t_j)`` where ``S2``
    and ``S4`` are the pairwise sums of squared and fourth-power differences of
    ``(t_1, ..., t_{n-1}, 0)``, over the box ``|t_j| <= n^(-1/2 + epsilon)``.
    """

    n: int
    a: float
    b: float = 0.0
    c: float = 0.0
    epsilon: float = 0.1
    sample_count: int = 10**5

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError("the box integral needs an integer n >= 2")
        if not self.a > 0:
            raise DomainError("a must be > 0")
        # the proven statement needs epsilon < 1/8; larger values up to 1/2 are
        # still meaningful boxes and are used for exploratory runs
        if not (0.0 < self.epsilon < 0.5):
            raise DomainError("epsilon must lie in (0, 1/2)")
        if self.sample_count < 1:
            raise DomainError("sample_count must be positive")

    @property
    def half_width(self) -> float:
        return self.n ** (-0.5 + self.epsilon)


def pairwise_power_sums(x):
    """``(sum_{j<k} (x_j-x_k)^2, sum_{j<k} (x_j-x_k)^4)`` along the last axis in O(m)."""
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    p1 = x.sum(axis=-1)
    x2 = x * x
    p2 = x2.sum(axis=-1)
    p3 = (x2 * x).sum(axis=-1)
    p4 = (x2 * x2).sum(axis=-1)
    s2 = m * p2 - p1 * p1
    s4 = m * p4 - 4.0 * p3 * p1 + 3.0 * p2 * p2
    return s2, s4


def lemma_log_integrand(spec: LemmaIntegralSpec, theta):
    """Log integrand for rows of free coordinates ``theta`` (the pinned zero is implicit)."""
    theta = np.asarray(theta, dtype=float)
    full = np.concatenate([theta, np.zeros(theta.shape[:-1] + (1,))], axis=-1)
    s2, s4 = pairwise_power_sums(full)
    return -spec.a * s2 + spec.b * s4 + spec.c / math.sqrt(spec.n) * theta.sum(axis=-1)


class _ConditionalGaussianProposal:
    """Box-restricted version of the Gaussian that matches ``exp(-a S2)``.

    Under that Gaussian ``t_j = e_j - z`` with ``e_1..e_m, z`` i.i.d.
    ``N(0, sd^2)``, ``sd^2 = 1/(2an)``.  The proposal draws ``z`` from a
    tabulated (piecewise-constant) version of its box-conditioned marginal
    ``phi(z) P(z)^m``, then each ``e_j`` from the normal truncated to
    ``[z - h, z + h]``.  ``z`` is an auxiliary variable paired with the
    backward kernel ``r(z | t) = N(-sum(t)/n, sd^2/n)``, its exact conditional
    under the untruncated Gaussian.  For ``b = c = 0`` the weights are
    almost constant.
    """

    def __init__(self, spec: "LemmaIntegralSpec", bins: int = 8192):
        self.m = spec.n - 1
        self.h = spec.half_width
        self.sd = math.sqrt(1.0 / (2.0 * spec.a * spec.n))
        lim = 12.0 * self.sd
        self.edges = np.linspace(-lim, lim, bins + 1)
        self.width = self.edges[1] - self.edges[0]
        mid = 0.5 * (self.edges[:-1] + self.edges[1:])
        logd = -0.5 * (mid / self.sd) ** 2 + self.m * self._log_box_prob(mid)
        logmass = logd - logsumexp(logd)
        self.log_density = logmass - math.log(self.width)
        self.cdf = np.cumsum(np.exp(logmass))
        self.cdf[-1] = 1.0

    def _log_box_prob(self, z):
        hi = (z + self.h) / self.sd
        lo = (z - self.h) / self.sd
        # use the tail on the side away from the mass for accuracy
        flip = lo > 0
        a = np.where(flip, -hi, lo)
        b = np.where(flip, -lo, hi)
        return np.log(special.ndtr(b) - special.ndtr(a))

    def draw(self, rng, count):
        """Return ``(t, log_q - log_r)`` for ``count`` proposals."""
        k = np.searchsorted(self.cdf, rng.random(count), side="right")
        k = np.minimum(k, self.cdf.size - 1)
        z = self.edges[k] + self.width * rng.random(count)
        lo = special.ndtr((z - self.h) / self.sd)[:, None]
        hi = special.ndtr((z + self.h) / self.sd)[:, None]
        u = lo + (hi - lo) * rng.random((count, self.m))
        e = self.sd * special.ndtri(u)
        e = np.clip(e, z[:, None] - self.h, z[:, None] + self.h)
        t = e - z[:, None]
        log_norm = -math.log(self.sd * math.sqrt(TWO_PI))
        log_q = (self.log_density[k]
                 + np.sum(-0.5 * (e / self.sd) ** 2 + log_norm, axis=1)
                 - self.m * self._log_box_prob(z))
        n = self.m + 1
        sd_r = self.sd / math.sqrt(n)
        mean_r = -t.sum(axis=1) / n
        log_r = -0.5 * ((z - mean_r) / sd_r) ** 2 - math.log(sd_r * math.sqrt(TWO_PI))
        return t, log_q - log_r


def lemma_J_mc(spec: LemmaIntegralSpec, seed: int, *, shards: int = 1,
               chunk: int | None = None, proposal: str = "gaussian") -> EstimateWithError:
    """Monte Carlo estimate of ``log J``.

    ``proposal="uniform"`` samples uniformly in the box, which is adequate only
    while the box is not much wider than the Gaussian scale ``1/sqrt(an)``;
    ``"gaussian"`` (default) uses the box-conditioned Gaussian proposal and
    works in both regimes.
    """
    if proposal not in ("uniform", "gaussian"):
        raise DomainError(f"unknown proposal {proposal!r}")
    m = spec.n - 1
    h = spec.half_width
    if chunk is None:
        chunk = max(256, 2**21 // m)
    gauss = _ConditionalGaussianProposal(spec) if proposal == "gaussian" else None
    counts = np.full(shards, spec.sample_count // shards)
    counts[: spec.sample_count % shards] += 1
    acc = LogMeanAccumulator()
    for c, ss in zip(counts, np.random.SeedSequence(seed).spawn(shards)):
        rng = np.random.default_rng(ss)
        part = LogMeanAccumulator()
        done = 0
        while done < c:
            b = min(chunk, c - done)
            if gauss is None:
                part.add(lemma_log_integrand(spec, rng.uniform(-h, h, size=(b, m))))
            else:
                t, log_q = gauss.draw(rng, b)
                part.add(lemma_log_integrand(spec, t) - log_q)
            done += b
        acc = acc.merge(part)
    est = acc.estimate("delta", half_width=h, proposal=proposal)
    if gauss is not None:
        return est
    log_volume = m * math.log(2.0 * h)
    return EstimateWithError(est.value + log_volume, est.std_error, est.count, "delta", est.diagnostics)
