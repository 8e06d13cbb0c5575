"""Tensor-grid quadrature for the n-fold integral at small n, and closed forms.

The integral of interest is

    I(s g) = int_{(-pi,pi]^n} prod_{j<k} |e^{i t_j} + e^{i t_k}|^beta prod_j e^{s g(t_j)} dt_j

with ``s`` equal to ``t/n``, ``t/sqrt(n)`` or ``t``.  On the uniform periodic
grid every pair factor depends only on the index difference modulo the grid
size, so a single lookup table of ``log(2|cos(h d / 2)|)`` serves all pairs and
antipodal pairs are detected exactly.
"""
from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, ResourceError
from .estimate import LogMeanAccumulator
from .model import TWO_PI, ModelParams
from .testfunc import ZERO, TestFunction

MAX_GRID_POINTS = 2**27
_BLOCK_POINTS = 2**16


class Scaling(str, enum.Enum):
    OVER_N = "n"
    OVER_SQRT_N = "sqrt-n"
    NONE = "none"

    def factor(self, n: int) -> float:
        if self is Scaling.OVER_N:
            return 1.0 / n
        if self is Scaling.OVER_SQRT_N:
            return 1.0 / math.sqrt(n)
        return 1.0


@dataclass(frozen=True)
class QuadratureSpec:
    points_per_dim: int = 64
    reduce_rotation: bool = False
    rule: str = "periodic-trapezoid"

    def __post_init__(self):
        if int(self.points_per_dim) != self.points_per_dim or self.points_per_dim < 8:
            raise DomainError("points_per_dim must be an integer >= 8")
        if self.rule != "periodic-trapezoid":
            raise DomainError(f"unknown quadrature rule {self.rule!r}")


@dataclass(frozen=True)
class QuadratureResult:
    log_value: float
    points_per_dim: int
    dims: int
    reduce_rotation: bool
    convergence_estimate: float
    coarse_log_value: float
    extrapolated_log_value: float

    def to_dict(self) -> dict:
        return {
            "log_value": self.log_value,
            "grid": {
                "rule": "periodic-trapezoid",
                "points_per_dim": self.points_per_dim,
                "dims": self.dims,
                "reduce_rotation": self.reduce_rotation,
            },
            "convergence_estimate": self.convergence_estimate,
            "coarse_log_value": self.coarse_log_value,
            "extrapolated_log_value": self.extrapolated_log_value,
        }


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("ANTIPODAL_THREADS", "1")))
    except ValueError:
        return 1


def grid_nodes(m: int) -> np.ndarray:
    """Uniform nodes ``-pi + 2*pi*(i+1)/m`` lying in (-pi, pi]."""
    return -math.pi + TWO_PI * (np.arange(m) + 1.0) / m


def _pair_table(m: int, beta: float) -> np.ndarray:
    d = np.arange(m)
    c = np.abs(np.cos(math.pi * d / m))
    if m % 2 == 0:
        c[m // 2] = 0.0
    with np.errstate(divide="ignore"):
        return beta * (math.log(2.0) + np.log(c))


def _check_size(params: ModelParams, spec: QuadratureSpec, rotation_free: bool,
                max_points: int) -> int:
    n = params.n
    dims = n - 1 if spec.reduce_rotation else n
    if spec.reduce_rotation:
        if not rotation_free:
            raise DomainError("reduce_rotation requires a rotation-invariant integrand (g constant or t = 0)")
        if n > 12:
            raise ResourceError(f"quadrature is limited to n <= 12 with rotation reduction, got n={n}")
    elif n > 7:
        raise ResourceError(f"full tensor quadrature is limited to n <= 7, got n={n}")
    total = float(spec.points_per_dim) ** dims
    if total > max_points:
        raise ResourceError(
            f"grid of {spec.points_per_dim}^{dims} = {total:.3g} points exceeds the limit of {max_points}"
        )
    return dims


def exact_I(params: ModelParams, g: TestFunction = ZERO, t: float = 0.0,
            scaling: Scaling | str = Scaling.OVER_N, spec: QuadratureSpec = QuadratureSpec(),
            *, max_points: int = MAX_GRID_POINTS, workers: int | None = None) -> float:
    """Log of the n-fold integral by the tensor periodic trapezoid rule."""
    scaling = Scaling(scaling)
    s = t * scaling.factor(params.n)
    rotation_free = t == 0 or g.is_constant
    dims = _check_size(params, spec, rotation_free, max_points)
    m = spec.points_per_dim
    n = params.n
    table = _pair_table(m, params.beta)
    if g.is_constant or t == 0:
        gvals = np.zeros(m)
        const = n * s * float(g(0.0)) if t != 0 else 0.0
    else:
        gvals = s * g(grid_nodes(m))
        const = 0.0
    h = TWO_PI / m

    if spec.reduce_rotation:
        # last angle pinned to one node; the others are free
        acc = _grid_logsumexp(dims, m, table, gvals, fixed=(0,), workers=workers)
        log_sum = acc.log_sum + math.log(TWO_PI) + dims * math.log(h)
    else:
        acc = _grid_logsumexp(dims, m, table, gvals, fixed=(), workers=workers)
        log_sum = acc.log_sum + dims * math.log(h)
    return log_sum + const


def _grid_logsumexp(dims, m, table, gvals, fixed, workers):
    """log-sum-exp of the grid log-integrand over ``dims`` free indices.

    ``fixed`` lists index values of pinned coordinates (they only enter
    through pair terms with the free coordinates and their own g term, which is
    zero whenever pinning is allowed).
    """
    # the trailing block is a dense array, the leading indices are looped over
    k = dims
    while k > 0 and m**k > _BLOCK_POINTS:
        k -= 1
    k = max(k, min(dims, 1))
    lead = dims - k
    block_shape = (m,) * k
    idx = np.indices(block_shape).reshape(k, -1) if k else np.zeros((0, 1), dtype=int)

    base = np.zeros(idx.shape[1])
    for a in range(k):
        base += gvals[idx[a]]
        for b in range(a + 1, k):
            base += table[(idx[a] - idx[b]) % m]
        for f in fixed:
            base += table[(idx[a] - f) % m]
    # cross[v][a] = table[(v - idx[a]) % m], summed lazily per leading index
    cross = np.stack([table[(v - idx) % m].sum(axis=0) for v in range(m)]) if lead else None

    def lead_chunk(first_values):
        acc = LogMeanAccumulator()
        if lead == 0:
            acc.add(base)
            return acc
        for v0 in first_values:
            for rest in np.ndindex(*((m,) * (lead - 1))):
                lead_idx = (v0,) + rest
                scal = 0.0
                vec = base.copy()
                for p, vp in enumerate(lead_idx):
                    scal += gvals[vp]
                    for f in fixed:
                        scal += table[(vp - f) % m]
                    for q in range(p + 1, lead):
                        scal += table[(vp - lead_idx[q]) % m]
                    vec += cross[vp]
                acc.add(vec + scal)
        return acc

    if lead == 0:
        return lead_chunk(())
    workers = workers or default_workers()
    slabs = np.array_split(np.arange(m), min(workers, m))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lead_chunk, slabs))
    else:
        parts = [lead_chunk(sl) for sl in slabs]
    total = parts[0]
    for p in parts[1:]:
        total = total.merge(p)
    return total


def richardson_order(beta: float) -> float | None:
    """Algebraic order of the trapezoid error caused by the antipodal cusp.

    ``|cos(x/2)|**beta`` behaves like ``|x - pi|**beta`` at the antipode; for even
    integer beta the integrand is a trigonometric polynomial and the rule is
    exact once the grid resolves it, so ``None`` is returned.
    """
    if float(beta).is_integer() and int(beta) % 2 == 0:
        return None
    return beta + 1.0


def exact_I_converged(params: ModelParams, g: TestFunction = ZERO, t: float = 0.0,
                      scaling: Scaling | str = Scaling.OVER_N,
                      spec: QuadratureSpec = QuadratureSpec(), **kw) -> QuadratureResult:
    """``exact_I`` on grids ``m`` and ``m/2`` with a convergence estimate.

    The estimate is ``|I_m - I_{m/2}|`` in log space.  For cusped integrands a
    Richardson extrapolation using the known cusp order is also reported.
    """
    fine = exact_I(params, g, t, scaling, spec, **kw)
    half = max(spec.points_per_dim // 2, 8)
    coarse_spec = QuadratureSpec(half, spec.reduce_rotation, spec.rule)
    coarse = exact_I(params, g, t, scaling, coarse_spec, **kw)
    order = richardson_order(params.beta)
    if order is None or half == spec.points_per_dim:
        extrap = fine
    else:
        r = (spec.points_per_dim / half) ** order
        # extrapolate the integral itself, not its log
        ratio = math.exp(coarse - fine)
        extrap = fine + math.log((r - ratio) / (r - 1.0))
    return QuadratureResult(
        log_value=fine,
        points_per_dim=spec.points_per_dim,
        dims=params.n - 1 if spec.reduce_rotation else params.n,
        reduce_rotation=spec.reduce_rotation,
        convergence_estimate=abs(fine - coarse),
        coarse_log_value=coarse,
        extrapolated_log_value=extrap,
    )


def exact_mgf(params: ModelParams, g: TestFunction, t: float,
              scaling: Scaling | str = Scaling.OVER_N, points_per_dim: int = 64, **kw) -> float:
    """``E[exp(s * sum_j g(theta_j))]`` as the ratio of two grid integrals on the same grid."""
    spec = QuadratureSpec(points_per_dim)
    return math.exp(exact_I(params, g, t, scaling, spec, **kw) - exact_I(params, ZERO, 0.0, scaling, spec, **kw))


def exact_mean_linear(params: ModelParams, g: TestFunction, points_per_dim: int = 64,
                      step: float = 1e-3, **kw) -> float:
    """``E[(1/n) sum_j g(theta_j)]`` as the t-derivative of ``log I((t/n) g)`` at 0.

    Uses the fourth-order central difference.
    """
    spec = QuadratureSpec(points_per_dim)
    f = [exact_I(params, g, k * step, Scaling.OVER_N, spec, **kw) for k in (-2, -1, 1, 2)]
    return (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * step)


def log_Z2_closed_form(beta: float) -> float:
    """``log Z_2 = log(2 pi 2^beta 2 sqrt(pi) Gamma((beta+1)/2) / Gamma(beta/2 + 1))``."""
    return (math.log(TWO_PI) + beta * math.log(2.0) + math.log(2.0 * math.sqrt(math.pi))
            + gammaln(0.5 * (beta + 1.0)) - gammaln(0.5 * beta + 1.0))


def gaussian_slice_log_integral(n: int, a: float) -> float:
    """Untruncated ``int exp(-a sum_{j<k} (t_j - t_k)^2)`` over R^{n-1} with ``t_n = 0``."""
    if n < 2 or a <= 0:
        raise DomainError("need n >= 2 and a > 0")
    return 0.5 * math.log(n) + 0.5 * (n - 1) * math.log(math.pi / (a * n))


def gaussian_slice_log_integral_det(n: int, a: float) -> float:
    """Same integral from the dense quadratic-form matrix: ``pi^{m/2} det(A)^{-1/2}``."""
    m = n - 1
    A = a * (n * np.eye(m) - np.ones((m, m)))
    sign, logdet = np.linalg.slogdet(A)
    if sign <= 0:
        raise DomainError("quadratic form is not positive definite")
    return 0.5 * m * math.log(math.pi) - 0.5 * logdet


def truncated_gaussian_log_integral(n: int, a: float, half_width: float) -> float:
    """Gaussian slice integral restricted to the box ``|t_j| <= half_width``.

    Under the normalised Gaussian, ``t_j = e_j - e_n`` with ``e`` i.i.d.
    ``N(0, 1/(2an))``, so the box probability is a one-dimensional integral
    over ``e_n`` of ``[Phi((e_n + h)/sd) - Phi((e_n - h)/sd)]^(n-1)``.
    """
    from scipy import integrate, special, stats

    sd = math.sqrt(1.0 / (2.0 * a * n))
    m = n - 1

    def integrand(z):
        p = special.ndtr((z + half_width) / sd) - special.ndtr((z - half_width) / sd)
        return stats.norm.pdf(z, scale=sd) * p**m

    lim = 12 * sd
    prob, _ = integrate.quad(integrand, -lim, lim, points=[0.0], limit=200, epsabs=0, epsrel=1e-12)
    return gaussian_slice_log_integral(n, a) + math.log(prob)
