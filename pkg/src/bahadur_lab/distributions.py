"""Standard normal primitives and the alternative distribution families.

The normal CDF/quantile pair is the workhorse of every statistic here, so
their accuracy contracts are explicit: ``std_normal_cdf`` is accurate to
1e-14 absolute and ``std_normal_quantile`` satisfies
``|cdf(quantile(p)) - p| <= 1e-12`` on (0, 1).

Alternative families are parameterized as:

* ``Exponential(rate)``          -- density rate*exp(-rate*x) on x >= 0
* ``DoubleExponential(m, s)``    -- density (2s)^-1 exp(-|x-m|/s)
* ``Cauchy(m, s)``               -- no finite moments
* ``Beta(a, b)``                 -- on (0, 1)
* ``Logistic(m, s)``             -- variance s^2 pi^2 / 3
* ``Uniform(lo, hi)``
* ``Normal(mu, sigma)``

Sampling is inverse-CDF only: a sample is a pure function of the uniform
variates drawn from a :class:`~bahadur_lab.rng.RandomStream`, which is what
makes the Monte Carlo harness deterministic under any parallel schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy import special

from .errors import DomainError, UndefinedMomentsError
from .rng import RandomStream


class MomentSummary(NamedTuple):
    mean: float
    sd: float


def std_normal_cdf(x):
    """Standard normal CDF, accurate to 1e-14 absolute.

    Accepts scalars or arrays; NaN input raises ``DomainError``.
    """
    arr = np.asarray(x, dtype=float)
    if np.isnan(arr).any():
        raise DomainError("NaN passed to std_normal_cdf")
    out = special.ndtr(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def std_normal_quantile(p):
    """Inverse of ``std_normal_cdf`` on (0, 1); roundtrip error <= 1e-12."""
    arr = np.asarray(p, dtype=float)
    if np.isnan(arr).any() or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("quantile argument must lie strictly inside (0, 1)")
    out = special.ndtri(arr)
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


def _std_normal_pdf(x):
    return np.exp(-0.5 * np.asarray(x, dtype=float) ** 2) / math.sqrt(2.0 * math.pi)


def _require_positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be finite and > 0, got {value}")


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0

    def __post_init__(self):
        _require_positive("rate", self.rate)

    @property
    def label(self) -> str:
        return f"exponential(rate={self.rate:g})"

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def quantile(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    def moments(self) -> MomentSummary:
        return MomentSummary(1.0 / self.rate, 1.0 / self.rate)

    def support(self):
        return (0.0, math.inf)


@dataclass(frozen=True)
class DoubleExponential:
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        _require_positive("scale", self.scale)

    @property
    def label(self) -> str:
        return f"double_exponential(loc={self.location:g},scale={self.scale:g})"

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.location) / self.scale
        return np.where(z < 0, 0.5 * np.exp(z), 1.0 - 0.5 * np.exp(-np.abs(z)))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        z = np.where(u < 0.5, np.log(2.0 * u), -np.log(2.0 * (1.0 - u)))
        return self.location + self.scale * z

    def moments(self) -> MomentSummary:
        return MomentSummary(self.location, self.scale * math.sqrt(2.0))

    def support(self):
        return (-math.inf, math.inf)


@dataclass(frozen=True)
class Cauchy:
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        _require_positive("scale", self.scale)

    @property
    def label(self) -> str:
        return f"cauchy(loc={self.location:g},scale={self.scale:g})"

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.location) / self.scale
        return 0.5 + np.arctan(z) / math.pi

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return self.location + self.scale * np.tan(math.pi * (u - 0.5))

    def moments(self) -> MomentSummary:
        raise UndefinedMomentsError("the Cauchy distribution has no finite moments")

    def support(self):
        return (-math.inf, math.inf)


@dataclass(frozen=True)
class Beta:
    alpha: float
    beta: float

    def __post_init__(self):
        _require_positive("alpha", self.alpha)
        _require_positive("beta", self.beta)

    @property
    def label(self) -> str:
        return f"beta({self.alpha:g},{self.beta:g})"

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return special.betainc(self.alpha, self.beta, np.clip(x, 0.0, 1.0))

    def quantile(self, u):
        return special.betaincinv(self.alpha, self.beta, np.asarray(u, dtype=float))

    def moments(self) -> MomentSummary:
        a, b = self.alpha, self.beta
        mean = a / (a + b)
        var = a * b / ((a + b) ** 2 * (a + b + 1.0))
        return MomentSummary(mean, math.sqrt(var))

    def support(self):
        return (0.0, 1.0)


@dataclass(frozen=True)
class Logistic:
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        _require_positive("scale", self.scale)

    @property
    def label(self) -> str:
        return f"logistic(loc={self.location:g},scale={self.scale:g})"

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.location) / self.scale
        return special.expit(z)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return self.location + self.scale * (np.log(u) - np.log1p(-u))

    def moments(self) -> MomentSummary:
        return MomentSummary(self.location, self.scale * math.pi / math.sqrt(3.0))

    def support(self):
        return (-math.inf, math.inf)


@dataclass(frozen=True)
class Uniform:
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise DomainError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def label(self) -> str:
        return f"uniform({self.lo:g},{self.hi:g})"

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def quantile(self, u):
        return self.lo + (self.hi - self.lo) * np.asarray(u, dtype=float)

    def moments(self) -> MomentSummary:
        return MomentSummary(0.5 * (self.lo + self.hi), (self.hi - self.lo) / math.sqrt(12.0))

    def support(self):
        return (self.lo, self.hi)


@dataclass(frozen=True)
class Normal:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        _require_positive("sigma", self.sigma)

    @property
    def label(self) -> str:
        return f"normal({self.mu:g},{self.sigma:g})"

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def quantile(self, u):
        return self.mu + self.sigma * special.ndtri(np.asarray(u, dtype=float))

    def moments(self) -> MomentSummary:
        return MomentSummary(self.mu, self.sigma)

    def support(self):
        return (-math.inf, math.inf)


AlternativeSpec = Union[
    Exponential, DoubleExponential, Cauchy, Beta, Logistic, Uniform, Normal
]

_FAMILIES = (Exponential, DoubleExponential, Cauchy, Beta, Logistic, Uniform, Normal)


def alt_cdf(spec: AlternativeSpec, x):
    """Closed-form CDF of the family at ``x`` (scalar or array)."""
    out = spec.cdf(x)
    return float(out) if np.isscalar(x) else out


def alt_moments(spec: AlternativeSpec) -> MomentSummary:
    """Mean and standard deviation; raises ``UndefinedMomentsError`` for Cauchy."""
    return spec.moments()


def sample(spec: AlternativeSpec, n: int, stream: RandomStream, replicate: int = 0) -> np.ndarray:
    """``n`` i.i.d. draws via the inverse CDF on the replicate's substream."""
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    u = stream.uniforms(replicate, n)
    return np.asarray(spec.quantile(u), dtype=float)


def table_alternatives() -> tuple[AlternativeSpec, ...]:
    """The seven benchmark alternatives in their default parameterizations."""
    return (
        Exponential(1.0),
        DoubleExponential(0.0, 1.0),
        Cauchy(0.0, 1.0),
        Beta(2.0, 1.0),
        Beta(3.0, 3.0),
        Logistic(0.0, 1.0),
        Uniform(0.0, 1.0),
    )
