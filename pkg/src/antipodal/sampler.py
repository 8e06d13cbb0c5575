"""Metropolis sampler for the antipodal Gibbs measure.

One sweep is ``n`` single-site random-walk updates followed by a uniform global
rotation.  The rotation leaves the density unchanged, so it is always accepted
and it refreshes the cluster position every sweep.  The single-site step size
adapts by Robbins-Monro during burn-in only.
"""
from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .diagnostics import effective_sample_size, integrated_autocorr_time
from .errors import DomainError, SamplerInitError
from .model import ModelParams, configuration, linear_statistic, log_weight, wrap_angle
from .testfunc import TestFunction

_BLOCK_VALUES = 2**18


class InitMode(str, enum.Enum):
    CLUSTER_AT_UNIFORM = "cluster"
    UNIFORM_IID = "uniform"


@dataclass(frozen=True)
class SamplerConfig:
    params: ModelParams
    step_scale: float | None = None
    sweeps_burn_in: int = 200
    sweeps_sample: int = 1000
    thin: int = 1
    replicas: int = 1
    init: InitMode = InitMode.CLUSTER_AT_UNIFORM
    adapt_target_acceptance: float = 0.3
    seed: int = 0
    monitor: TestFunction | None = None

    def __post_init__(self):
        if self.step_scale is None:
            object.__setattr__(self, "step_scale", 2.0 / math.sqrt(self.params.beta * self.params.n))
        object.__setattr__(self, "init", InitMode(self.init))
        if not self.step_scale > 0:
            raise DomainError("step_scale must be > 0")
        if self.sweeps_burn_in < 1 or self.sweeps_sample < 1:
            raise DomainError("burn-in and sampling need at least one sweep each")
        if self.thin < 1 or self.replicas < 1:
            raise DomainError("thin and replicas must be >= 1")
        if not (0.0 < self.adapt_target_acceptance < 1.0):
            raise DomainError("target acceptance must lie in (0, 1)")

    def with_n(self, n: int) -> "SamplerConfig":
        """Same settings for another number of points (default step rescaled)."""
        return replace(self, params=ModelParams(n, self.params.beta), step_scale=None)

    @property
    def samples_per_chain(self) -> int:
        return self.sweeps_sample // self.thin


@dataclass(frozen=True)
class ChainDiagnostics:
    acceptance_rate: float
    integrated_autocorrelation_time: float
    effective_sample_size: float
    final_step_scale: float
    burn_in_acceptance_rate: float = math.nan

    def to_dict(self) -> dict:
        return {
            "acceptance_rate": self.acceptance_rate,
            "integrated_autocorrelation_time": self.integrated_autocorrelation_time,
            "effective_sample_size": self.effective_sample_size,
            "final_step_scale": self.final_step_scale,
            "burn_in_acceptance_rate": self.burn_in_acceptance_rate,
        }


@dataclass
class ChainResult:
    """Collected configurations (one per row) plus diagnostics.

    ``step_trace`` holds the step size used in every sweep, burn-in first.
    """

    samples: np.ndarray
    diagnostics: ChainDiagnostics
    initial: np.ndarray
    initial_center: float | None
    step_trace: np.ndarray = field(repr=False)
    monitor_trace: np.ndarray = field(repr=False)


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Generator for one replica; identical to ``SeedSequence(seed).spawn(...)[replica]``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replica,)))


def initial_state(config: SamplerConfig, rng: np.random.Generator):
    n = config.params.n
    if config.init is InitMode.CLUSTER_AT_UNIFORM:
        centre = float(rng.uniform(-math.pi, math.pi))
        theta = wrap_angle(centre + config.step_scale * rng.standard_normal(n))
        return theta, centre
    return wrap_angle(rng.uniform(-math.pi, math.pi, size=n)), None


def monitor_values(samples, monitor: TestFunction | None) -> np.ndarray:
    """The designated scalar: ``(1/n) sum_j g(theta_j)`` or ``cos(theta_1)``."""
    samples = np.asarray(samples)
    if monitor is None:
        return np.cos(samples[:, 0])
    return linear_statistic(samples, monitor) / samples.shape[1]


def run_chain(config: SamplerConfig, replica: int = 0, initial=None) -> ChainResult:
    """Run one chain; its random stream is derived from ``(config.seed, replica)``."""
    params = config.params
    n = params.n
    rng = replica_rng(config.seed, replica)
    if initial is None:
        theta, centre = initial_state(config, rng)
    else:
        theta, centre = configuration(initial, params).copy(), None
    if log_weight(theta, params) == -math.inf:
        raise SamplerInitError("initial configuration has zero density (an antipodal pair)")
    start = theta.copy()

    total = config.sweeps_burn_in + config.sweeps_sample
    n_keep = config.samples_per_chain
    samples = np.empty((n_keep, n))
    accepted = np.empty(total, dtype=np.int64)
    steps = np.empty(total)
    log_step = math.log(config.step_scale)
    block = max(1, _BLOCK_VALUES // n)

    done = 0
    recorded = 0
    for phase_len, adapt in ((config.sweeps_burn_in, True), (config.sweeps_sample, False)):
        phase_done = 0
        while phase_done < phase_len:
            b = min(block, phase_len - phase_done)
            normals = rng.standard_normal((b, n))
            log_u = np.log(rng.random((b, n)))
            rotations = rng.uniform(-math.pi, math.pi, size=b)
            sl = slice(done, done + b)
            out = samples[recorded:] if not adapt else samples[:0]
            log_step, n_rec = _kernels.run_sweeps(
                theta, params.beta, log_step, normals, log_u, rotations,
                adapt, config.adapt_target_acceptance, phase_done,
                0 if adapt else config.thin, phase_done, out, accepted[sl], steps[sl],
            )
            recorded += n_rec
            done += b
            phase_done += b

    burn = config.sweeps_burn_in
    mon = monitor_values(samples, config.monitor)
    tau = integrated_autocorr_time(mon)
    diag = ChainDiagnostics(
        acceptance_rate=float(accepted[burn:].sum() / (config.sweeps_sample * n)),
        integrated_autocorrelation_time=tau,
        effective_sample_size=effective_sample_size(mon),
        final_step_scale=float(math.exp(log_step)),
        burn_in_acceptance_rate=float(accepted[:burn].sum() / (burn * n)),
    )
    return ChainResult(samples, diag, start, centre, steps, mon)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("ANTIPODAL_THREADS", "1")))
    except ValueError:
        return 1


def run_replicas(config: SamplerConfig, workers: int | None = None) -> list[ChainResult]:
    """Run ``config.replicas`` independent chains, returned in replica order."""
    workers = workers or default_workers()
    idx = range(config.replicas)
    if workers > 1 and config.replicas > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda r: run_chain(config, r), idx))
    return [run_chain(config, r) for r in idx]
