"""2*pi-periodic test functions used in linear statistics.

Two flavours are supported:

* a finite Fourier series ``a0 + sum_k (a_k cos k t + b_k sin k t)``, smooth,
  with an exact derivative;
* ``amplitude * |sin((t - center)/2)|**(2q)``, which is only Hoelder
  continuous of order ``min(2q, 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class HolderPower:
    q: float
    amplitude: float = 1.0
    center: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.q <= 1.0):
            raise DomainError(f"Hoelder exponent q must lie in (0, 1], got {self.q}")


@dataclass(frozen=True)
class TestFunction:
    """A periodic test function ``g``; see the module docstring.

    ``holder`` is ``None`` for the Fourier variant.
    """

    __test__ = False  # keep pytest from collecting this class

    a0: float = 0.0
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()
    holder: HolderPower | None = None
    _cos: np.ndarray = field(init=False, repr=False, compare=False)
    _sin: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        k = max(len(self.cos_coeffs), len(self.sin_coeffs))
        a = np.zeros(k)
        b = np.zeros(k)
        a[: len(self.cos_coeffs)] = self.cos_coeffs
        b[: len(self.sin_coeffs)] = self.sin_coeffs
        object.__setattr__(self, "cos_coeffs", tuple(float(x) for x in a))
        object.__setattr__(self, "sin_coeffs", tuple(float(x) for x in b))
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "_cos", a)
        object.__setattr__(self, "_sin", b)

    @property
    def is_fourier(self) -> bool:
        return self.holder is None

    @property
    def degree(self) -> int:
        return len(self.cos_coeffs)

    @property
    def is_constant(self) -> bool:
        if not self.is_fourier:
            return self.holder.amplitude == 0.0
        return not (np.any(self._cos) or np.any(self._sin))

    @property
    def hoelder_exponent(self) -> float:
        """Largest q with g in C^{0,q} (1 for trigonometric polynomials)."""
        if self.is_fourier:
            return 1.0
        return min(2.0 * self.holder.q, 1.0)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if not self.is_fourier:
            h = self.holder
            return h.amplitude * np.abs(np.sin(0.5 * (theta - h.center))) ** (2.0 * h.q)
        out = np.full(theta.shape, self.a0)
        for k in range(1, self.degree + 1):
            ak, bk = self._cos[k - 1], self._sin[k - 1]
            if ak:
                out = out + ak * np.cos(k * theta)
            if bk:
                out = out + bk * np.sin(k * theta)
        return out

    def derivative_function(self) -> "TestFunction":
        if not self.is_fourier:
            raise DomainError("the Hoelder-power test function has no continuous derivative")
        k = np.arange(1, self.degree + 1)
        return TestFunction(0.0, tuple(k * self._sin), tuple(-k * self._cos))

    def derivative(self, theta):
        return self.derivative_function()(theta)

    def shifted(self, s: float) -> "TestFunction":
        """Return ``theta -> g(theta - s)``."""
        if not self.is_fourier:
            h = self.holder
            return TestFunction(holder=HolderPower(h.q, h.amplitude, h.center + s))
        k = np.arange(1, self.degree + 1)
        c, sn = np.cos(k * s), np.sin(k * s)
        a = self._cos * c - self._sin * sn
        b = self._cos * sn + self._sin * c
        return TestFunction(self.a0, tuple(a), tuple(b))

    def max_abs(self) -> float:
        if not self.is_fourier:
            return abs(self.holder.amplitude)
        return abs(self.a0) + float(np.sum(np.abs(self._cos) + np.abs(self._sin)))

    def describe(self) -> str:
        if not self.is_fourier:
            h = self.holder
            return f"holder:{h.q:g},{h.amplitude:g}" + (f"@{h.center:g}" if h.center else "")
        parts = [f"{self.a0:g}"]
        for a, b in zip(self.cos_coeffs, self.sin_coeffs):
            parts += [f"{a:g}", f"{b:g}"]
        return "fourier:" + ",".join(parts)


def constant(c: float) -> TestFunction:
    return TestFunction(a0=c)


def fourier(a0: float = 0.0, cos_coeffs=(), sin_coeffs=()) -> TestFunction:
    return TestFunction(a0, tuple(cos_coeffs), tuple(sin_coeffs))


def holder_power(q: float, amplitude: float = 1.0) -> TestFunction:
    return TestFunction(holder=HolderPower(q, amplitude))


COS = fourier(0.0, (1.0,))
SIN = fourier(0.0, (), (1.0,))
ZERO = constant(0.0)


def parse_test_function(spec: str) -> TestFunction:
    """Parse the command-line mini language for test functions.

    Accepted forms: ``cos``, ``sin``, ``0``, ``c:<val>``,
    ``fourier:a0,a1,b1,a2,b2,...`` and ``holder:q,amp``.
    """
    s = spec.strip().lower()
    try:
        if s == "cos":
            return COS
        if s == "sin":
            return SIN
        if s.startswith("c:"):
            return constant(float(s[2:]))
        if s.startswith("fourier:"):
            vals = [float(v) for v in s[len("fourier:"):].split(",") if v.strip()]
            if not vals:
                raise ValueError("empty coefficient list")
            rest = vals[1:]
            if len(rest) % 2:
                rest.append(0.0)
            return fourier(vals[0], rest[0::2], rest[1::2])
        if s.startswith("holder:"):
            vals = [float(v) for v in s[len("holder:"):].split(",")]
            if len(vals) not in (1, 2):
                raise ValueError("expected holder:q[,amp]")
            return holder_power(*vals)
        return constant(float(s))
    except ValueError as exc:
        raise DomainError(f"cannot parse test function {spec!r}: {exc}") from None
