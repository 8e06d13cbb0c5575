"""Compiled O(n) / O(n^2) inner loops.

Pair factors are evaluated through half-angle tables,
``cos((a - b)/2) = cos(a/2)cos(b/2) + sin(a/2)sin(b/2)``, and logs are taken of
products of eight factors at a time.  Factors are bounded by one, so a block
product cannot overflow; an exact zero yields ``-inf`` as it should.
"""
import math

import numpy as np
from numba import njit

PI = math.pi
TWO_PI = 2.0 * math.pi
LOG_2 = math.log(2.0)
_BLOCK = 8


@njit(cache=True, nogil=True)
def wrap(x):
    if -PI < x <= PI:
        return x
    y = PI - ((PI - x) % TWO_PI)
    if y <= -PI:
        y += TWO_PI
    return y


@njit(cache=True, nogil=True)
def delta_log_weight(j, proposal, hc, hs, beta):
    """Change of the log weight when angle ``j`` moves to ``proposal``."""
    pc = math.cos(0.5 * proposal)
    ps = math.sin(0.5 * proposal)
    oc = hc[j]
    os_ = hs[j]
    lnew = 0.0
    lold = 0.0
    pn = 1.0
    po = 1.0
    cnt = 0
    for k in range(hc.shape[0]):
        if k == j:
            continue
        pn *= abs(pc * hc[k] + ps * hs[k])
        po *= abs(oc * hc[k] + os_ * hs[k])
        cnt += 1
        if cnt == _BLOCK:
            lnew += math.log(pn)
            lold += math.log(po)
            pn = 1.0
            po = 1.0
            cnt = 0
    lnew += math.log(pn)
    lold += math.log(po)
    return beta * (lnew - lold)


@njit(cache=True, nogil=True)
def log_weight_rows(thetas, beta):
    """Log weight of every row of a (count, n) array of configurations."""
    m, n = thetas.shape
    out = np.empty(m)
    hc = np.empty(n)
    hs = np.empty(n)
    npairs = n * (n - 1) // 2
    for r in range(m):
        for j in range(n):
            hc[j] = math.cos(0.5 * thetas[r, j])
            hs[j] = math.sin(0.5 * thetas[r, j])
        acc = 0.0
        p = 1.0
        cnt = 0
        for j in range(n):
            cj = hc[j]
            sj = hs[j]
            for k in range(j + 1, n):
                p *= abs(cj * hc[k] + sj * hs[k])
                cnt += 1
                if cnt == _BLOCK:
                    acc += math.log(p)
                    p = 1.0
                    cnt = 0
        acc += math.log(p)
        out[r] = beta * (acc + npairs * LOG_2)
    return out


@njit(cache=True, nogil=True)
def run_sweeps(theta, beta, log_step, normals, log_u, rotations, adapt, target,
               adapt_offset, record_every, record_offset, out, accepted, steps):
    """Run ``len(rotations)`` Metropolis sweeps in place on ``theta``.

    A sweep is one single-site random-walk update per angle followed by a
    global rotation.  When ``adapt`` is set the log step size follows a
    Robbins-Monro recursion towards the target acceptance rate.  Every
    ``record_every``-th sweep (counted from ``record_offset``) the state is
    copied into ``out``.  Returns the final log step and the number of
    recorded rows.
    """
    n = theta.shape[0]
    hc = np.empty(n)
    hs = np.empty(n)
    for j in range(n):
        hc[j] = math.cos(0.5 * theta[j])
        hs[j] = math.sin(0.5 * theta[j])
    n_rec = 0
    lo = math.log(1e-6)
    hi = math.log(TWO_PI)
    for i in range(rotations.shape[0]):
        step = math.exp(log_step)
        acc = 0
        for j in range(n):
            prop = wrap(theta[j] + step * normals[i, j])
            d = delta_log_weight(j, prop, hc, hs, beta)
            if log_u[i, j] < d:
                theta[j] = prop
                hc[j] = math.cos(0.5 * prop)
                hs[j] = math.sin(0.5 * prop)
                acc += 1
        s = rotations[i]
        for j in range(n):
            theta[j] = wrap(theta[j] + s)
            hc[j] = math.cos(0.5 * theta[j])
            hs[j] = math.sin(0.5 * theta[j])
        accepted[i] = acc
        steps[i] = step
        if adapt:
            gain = (adapt_offset + i + 1.0) ** -0.6
            log_step += gain * (acc / n - target)
            log_step = min(max(log_step, lo), hi)
        if record_every > 0 and (record_offset + i + 1) % record_every == 0:
            out[n_rec, :] = theta
            n_rec += 1
    return log_step, n_rec


@njit(cache=True, nogil=True)
def wrapped_normal_logpdf_flat(x, sd, kmax):
    """Wrapped-normal log density at points ``x`` in [-pi, pi].

    For such ``x`` the ``k = 0`` image dominates every other one, so the
    remaining images enter through a ``log1p`` of terms bounded by one.
    """
    out = np.empty(x.shape[0])
    inv = 0.5 / (sd * sd)
    norm = -math.log(sd * math.sqrt(TWO_PI))
    for i in range(x.shape[0]):
        xi = x[i]
        base = xi * xi
        tail = 0.0
        for k in range(1, kmax + 1):
            a = xi + TWO_PI * k
            b = xi - TWO_PI * k
            tail += math.exp(-(a * a - base) * inv) + math.exp(-(b * b - base) * inv)
        out[i] = norm - base * inv + math.log1p(tail)
    return out
