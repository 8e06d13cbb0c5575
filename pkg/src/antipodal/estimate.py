"""Monte Carlo return types and log-domain accumulation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class EstimateWithError:
    """Point estimate, standard error and sample count.

    ``method`` records how the standard error was obtained (``"batch-means"``,
    ``"replicas"``, ``"binomial"``, ``"delta"``, ``"iid"``).
    """

    value: float
    std_error: float
    count: int
    method: str = "iid"
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.std_error < 0 or math.isnan(self.std_error):
            raise ValueError("standard error must be non-negative")

    def z_score(self, reference: float, extra_error: float = 0.0) -> float:
        se = math.hypot(self.std_error, extra_error)
        if se == 0.0:
            return 0.0 if self.value == reference else math.inf
        return (self.value - reference) / se

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "count": self.count,
            "method": self.method,
            **({"diagnostics": self.diagnostics} if self.diagnostics else {}),
        }


class LogMeanAccumulator:
    """Streaming log-sum-exp of weights ``w_i = exp(x_i)``.

    Keeps ``log sum w`` and ``log sum w**2`` relative to a running maximum, so
    chunks of log-weights of any magnitude can be folded in without overflow.
    Merging two accumulators is exact up to rounding, which lets independent
    shards be combined in a fixed order.
    """

    def __init__(self):
        self.count = 0
        self.shift = -math.inf
        self.s1 = 0.0
        self.s2 = 0.0
        self.max_log = -math.inf

    def add(self, log_w) -> "LogMeanAccumulator":
        x = np.asarray(log_w, dtype=float).ravel()
        if x.size == 0:
            return self
        if np.any(np.isnan(x)) or np.any(x == np.inf):
            raise FloatingPointError("log-weights must be finite or -inf")
        self.count += x.size
        m = float(x.max())
        self.max_log = max(self.max_log, m)
        if m == -math.inf:
            return self
        if m > self.shift:
            if self.shift > -math.inf:
                r = math.exp(self.shift - m)
                self.s1 *= r
                self.s2 *= r * r
            self.shift = m
        e = np.exp(x - self.shift)
        self.s1 += float(e.sum())
        self.s2 += float((e * e).sum())
        return self

    def merge(self, other: "LogMeanAccumulator") -> "LogMeanAccumulator":
        out = LogMeanAccumulator()
        out.count = self.count + other.count
        out.max_log = max(self.max_log, other.max_log)
        out.shift = max(self.shift, other.shift)
        for acc in (self, other):
            if acc.shift > -math.inf:
                r = math.exp(acc.shift - out.shift)
                out.s1 += acc.s1 * r
                out.s2 += acc.s2 * r * r
        return out

    @property
    def log_sum(self) -> float:
        return self.shift + math.log(self.s1) if self.s1 > 0 else -math.inf

    @property
    def log_mean(self) -> float:
        return self.log_sum - math.log(self.count)

    @property
    def ess(self) -> float:
        """Kish effective sample size ``(sum w)^2 / sum w^2``."""
        return self.s1 * self.s1 / self.s2 if self.s2 > 0 else 0.0

    @property
    def max_weight_share(self) -> float:
        if self.s1 <= 0:
            return 1.0
        return math.exp(self.max_log - self.shift) / self.s1

    @property
    def log_std_error(self) -> float:
        """Delta-method standard error of ``log(mean w)``."""
        if self.s1 <= 0 or self.count < 2:
            return math.inf
        n = self.count
        mean = self.s1 / n
        var = max(self.s2 / n - mean * mean, 0.0) * n / (n - 1)
        return math.sqrt(var / n) / mean

    def estimate(self, method: str = "delta", **diagnostics) -> EstimateWithError:
        diag = {"ess": self.ess, "max_weight_share": self.max_weight_share, **diagnostics}
        return EstimateWithError(self.log_mean, self.log_std_error, self.count, method, diag)
