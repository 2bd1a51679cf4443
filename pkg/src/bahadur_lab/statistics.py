"""Test statistics, all oriented so that large values reject normality.

Two groups live here:

* simple-null statistics (``ks_statistic``, ``cvm_statistic``,
  ``ad_statistic``) scored against an explicit continuous null CDF, and
* studentized statistics (``lilliefors_statistic``,
  ``weighted_cvm_statistic``, ``shapiro_wilk_statistic``,
  ``bhep_statistic``) which center by the sample mean and scale by the
  n-1 standard deviation, making them location-scale invariant.

Closed forms are used wherever they are exact:

* KS distance        max_i max(i/n - u_(i), u_(i) - (i-1)/n)
* CvM integral       [1/(12n) + sum_i (u_(i) - (2i-1)/(2n))^2] / n
* AD integral        A^2/n,  A^2 = -n - n^-1 sum_i (2i-1)[ln u_(i) + ln(1 - u_(n+1-i))]

CvM/AD values are reported in the *integral* normalization, i.e. they equal
the defining integral of the squared ECDF deviation; the conventional
n-scaled variants are exposed separately where useful.  Orientation is
uniform: every statistic rejects for large values (Shapiro-Wilk is exposed
as 1 - W for that reason).

``score_matrix`` evaluates a set of statistics on an (N, n) matrix of
replicate samples in vectorized form; it is the single numeric path shared
by the scalar operations and the Monte Carlo harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .errors import (
    DegenerateSampleError,
    DegenerateTailError,
    DomainError,
    SampleSizeError,
)

__all__ = [
    "Sample",
    "UnitWeight",
    "ADWeight",
    "PiecewiseLinearWeight",
    "UNIT",
    "AD_WEIGHT",
    "KolmogorovSmirnov",
    "CramerVonMises",
    "AndersonDarling",
    "Lilliefors",
    "WeightedCvM",
    "ShapiroWilk",
    "Bhep",
    "TestKind",
    "ks_statistic",
    "cvm_statistic",
    "ad_statistic",
    "ad_statistic_a2",
    "lilliefors_statistic",
    "lilliefors_scan",
    "weighted_cvm_statistic",
    "shapiro_wilk_w",
    "shapiro_wilk_statistic",
    "bhep_statistic",
    "score_matrix",
    "evaluate_matrix",
]


# ---------------------------------------------------------------------------
# samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Sample:
    """Ordered observations with cached summary statistics.

    ``sd`` uses the n-1 divisor.  Construction accepts any ordering and any
    n >= 1; operations that need studentization enforce n >= 2 and sd > 0
    themselves.
    """

    values: np.ndarray
    n: int
    mean: float
    sd: float

    @classmethod
    def from_values(cls, values) -> "Sample":
        arr = np.sort(np.asarray(values, dtype=float))
        if arr.ndim != 1 or arr.size == 0:
            raise DomainError("a sample needs at least one observation")
        if not np.isfinite(arr).all():
            raise DomainError("sample contains non-finite values")
        n = arr.size
        mean = float(arr.mean())
        sd = float(arr.std(ddof=1)) if n > 1 else 0.0
        return cls(arr, n, mean, sd)

    def standardized(self) -> np.ndarray:
        if self.n < 2 or self.sd == 0.0:
            raise DegenerateSampleError(
                "studentization needs n >= 2 and a non-constant sample"
            )
        return (self.values - self.mean) / self.sd


# ---------------------------------------------------------------------------
# weight functions
# ---------------------------------------------------------------------------


class UnitWeight:
    """psi == 1; valid both as a bounded weight on t and as an
    integrable weight on u."""

    label = "unit"
    bounded = True

    def on_t(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def on_u(self, u):
        return np.ones_like(np.asarray(u, dtype=float))

    def bound(self) -> float:
        return 1.0

    def slope_bound(self) -> float:
        return 0.0

    def __repr__(self):
        return "UnitWeight()"


class ADWeight:
    """psi(u) = 1/(u(1-u)) on (0, 1); integrable against dPhi but unbounded,
    so it is rejected for sup-type statistics."""

    label = "ad"
    bounded = False

    def on_u(self, u):
        u = np.asarray(u, dtype=float)
        return 1.0 / (u * (1.0 - u))

    def on_t(self, t):
        raise DomainError("the 1/(u(1-u)) weight is unbounded; sup-type statistics need a bounded weight")

    def __repr__(self):
        return "ADWeight()"


@dataclass(frozen=True)
class PiecewiseLinearWeight:
    """Bounded piecewise-linear weight given by knots; constant outside the
    knot range.  ``domain`` says whether the knots live on the real line
    ("t", for sup-type statistics) or on (0, 1) ("u", for integral-type)."""

    knots: tuple
    heights: tuple
    domain: str = "t"
    label: str = "pl"
    bounded: bool = field(default=True, init=False)

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        h = np.asarray(self.heights, dtype=float)
        if k.size != h.size or k.size < 2 or np.any(np.diff(k) <= 0):
            raise DomainError("knots must be strictly increasing and match heights")
        if np.any(h < 0) or not np.isfinite(h).all():
            raise DomainError("weight heights must be finite and nonnegative")
        if self.domain not in ("t", "u"):
            raise DomainError("domain must be 't' or 'u'")

    def _interp(self, x):
        return np.interp(np.asarray(x, dtype=float), self.knots, self.heights)

    def on_t(self, t):
        if self.domain != "t":
            raise DomainError("this weight is defined on u = Phi(t), not on t")
        return self._interp(t)

    def on_u(self, u):
        if self.domain != "u":
            raise DomainError("this weight is defined on t, not on u")
        return self._interp(u)

    def bound(self) -> float:
        return float(max(self.heights))

    def slope_bound(self) -> float:
        k = np.asarray(self.knots, dtype=float)
        h = np.asarray(self.heights, dtype=float)
        return float(np.max(np.abs(np.diff(h) / np.diff(k))))


UNIT = UnitWeight()
AD_WEIGHT = ADWeight()


# ---------------------------------------------------------------------------
# test kinds (harness descriptors; orientation always "large rejects")
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KolmogorovSmirnov:
    """KS distance to the fixed standard normal null."""

    label: str = field(default="KS0", init=False)
    min_n: int = 1


@dataclass(frozen=True)
class CramerVonMises:
    """CvM integral against the fixed standard normal null."""

    label: str = field(default="CM0", init=False)
    min_n: int = 1


@dataclass(frozen=True)
class AndersonDarling:
    """AD integral against the fixed standard normal null."""

    label: str = field(default="AD0", init=False)
    min_n: int = 1


@dataclass(frozen=True)
class Lilliefors:
    weight: object = UNIT
    min_n: int = 2

    def __post_init__(self):
        if not getattr(self.weight, "bounded", False):
            raise DomainError("Lilliefors weight must be bounded")

    @property
    def label(self) -> str:
        return "L" if isinstance(self.weight, UnitWeight) else f"L[{self.weight.label}]"


@dataclass(frozen=True)
class WeightedCvM:
    weight: object = UNIT
    min_n: int = 2

    @property
    def label(self) -> str:
        if isinstance(self.weight, UnitWeight):
            return "CM"
        if isinstance(self.weight, ADWeight):
            return "AD"
        return f"CM[{self.weight.label}]"


@dataclass(frozen=True)
class ShapiroWilk:
    label: str = field(default="SW", init=False)
    min_n: int = 3


@dataclass(frozen=True)
class Bhep:
    beta: float = 1.0
    min_n: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise DomainError(f"BHEP smoothing parameter must be > 0, got {self.beta}")

    @property
    def label(self) -> str:
        return "BHEP" if self.beta == 1.0 else f"BHEP(b={self.beta:g})"


TestKind = (
    KolmogorovSmirnov,
    CramerVonMises,
    AndersonDarling,
    Lilliefors,
    WeightedCvM,
    ShapiroWilk,
    Bhep,
)


# ---------------------------------------------------------------------------
# closed-form cores on probability matrices (N, n)
# ---------------------------------------------------------------------------


def _ks_core(u):
    n = u.shape[1]
    i = np.arange(1, n + 1)
    return np.maximum(i / n - u, u - (i - 1) / n).max(axis=1)


def _cvm_core(u):
    n = u.shape[1]
    i = np.arange(1, n + 1)
    return (1.0 / (12.0 * n) + ((u - (2 * i - 1) / (2.0 * n)) ** 2).sum(axis=1)) / n


def _ad_core(u):
    n = u.shape[1]
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise DegenerateTailError("null CDF saturated to 0 or 1 at an observation")
    i = np.arange(1, n + 1)
    a2 = -n - ((2 * i - 1) * (np.log(u) + np.log1p(-u[:, ::-1]))).sum(axis=1) / n
    return a2 / n


def _sw_core(z, n):
    a = _sw_coefficients(n)
    w = (z @ a) ** 2 / (n - 1.0)
    return np.minimum(w, 1.0)


def _bhep_core(z, beta, chunk=2048):
    n = z.shape[1]
    b2 = beta * beta
    c2 = 2.0 / math.sqrt(1.0 + b2)
    c3 = n / math.sqrt(1.0 + 2.0 * b2)
    out = np.empty(z.shape[0])
    for s in range(0, z.shape[0], chunk):
        zc = z[s : s + chunk]
        diff = zc[:, :, None] - zc[:, None, :]
        t1 = np.exp(-0.5 * b2 * diff * diff).sum(axis=(1, 2)) / n
        t2 = c2 * np.exp(-b2 * zc * zc / (2.0 * (1.0 + b2))).sum(axis=1)
        out[s : s + chunk] = t1 - t2 + c3
    return out


# ---------------------------------------------------------------------------
# scalar operations
# ---------------------------------------------------------------------------


def _null_probs(sample: Sample, null_cdf: Callable) -> np.ndarray:
    u = np.asarray(null_cdf(sample.values), dtype=float)
    if u.shape != sample.values.shape:
        raise DomainError("null_cdf must evaluate elementwise on the sample")
    if np.any(u < 0.0) or np.any(u > 1.0) or not np.isfinite(u).all():
        raise DomainError("null_cdf values must lie in [0, 1]")
    return u


def ks_statistic(sample: Sample, null_cdf: Callable) -> float:
    """sup_t |F_n(t) - F0(t)| for a continuous F0, via the jump-point form."""
    return float(_ks_core(_null_probs(sample, null_cdf)[None, :])[0])


def cvm_statistic(sample: Sample, null_cdf: Callable) -> float:
    """The squared-deviation integral of the ECDF against F0 (integral
    normalization, i.e. the defining integral itself)."""
    return float(_cvm_core(_null_probs(sample, null_cdf)[None, :])[0])


def ad_statistic(sample: Sample, null_cdf: Callable) -> float:
    """The 1/(u(1-u))-weighted squared-deviation integral (= A^2/n).

    Saturated null probabilities raise ``DegenerateTailError`` rather than
    being clipped.
    """
    return float(_ad_core(_null_probs(sample, null_cdf)[None, :])[0])


def ad_statistic_a2(sample: Sample, null_cdf: Callable) -> float:
    """Conventional A-squared normalization (n times the integral form)."""
    return sample.n * ad_statistic(sample, null_cdf)


def lilliefors_statistic(sample: Sample, weight=UNIT) -> float:
    """sup_t |F_n(mean + sd*t) - Phi(t)| psi(t) with a bounded psi.

    For the unit weight the supremum sits at the standardized jump points
    and the value is exact; other bounded weights go through
    :func:`lilliefors_scan`.
    """
    if not getattr(weight, "bounded", False):
        raise DomainError("lilliefors_statistic needs a bounded weight")
    z = sample.standardized()
    if isinstance(weight, UnitWeight):
        v = special.ndtr(z)
        return float(_ks_core(v[None, :])[0])
    return lilliefors_scan(sample, weight).value


class ScanResult(NamedTuple):
    value: float
    tolerance: float


def lilliefors_scan(sample: Sample, weight=UNIT, points_per_interval: int = 512) -> ScanResult:
    """Grid-plus-refinement evaluation of the weighted sup statistic.

    Evaluates both one-sided limits at every standardized jump, a
    ``points_per_interval`` grid inside each inter-jump interval (restricted
    to where the weight can move the supremum), and one local
    golden-section refinement per interval.  The reported tolerance is the
    usual grid bound: cell width times a bound on |d/dt of Phi(t) psi(t)|
    over the cell.
    """
    z = sample.standardized()
    n = sample.n
    psi = weight.on_t

    knots = np.asarray(getattr(weight, "knots", ()), dtype=float)
    lo = min(z[0], knots[0]) if knots.size else z[0]
    hi = max(z[-1], knots[-1]) if knots.size else z[-1]

    # supremum candidates at the two one-sided limits of every jump
    psi_z = psi(z)
    i = np.arange(1, n + 1)
    best = float(np.max(np.maximum((i / n - special.ndtr(z)) * psi_z,
                                   (special.ndtr(z) - (i - 1) / n) * psi_z)))

    edges = np.unique(np.concatenate([[lo], z, [hi]]))
    slope = weight.slope_bound() if hasattr(weight, "slope_bound") else 0.0
    tol = 0.0
    phi_max_global = 1.0 / math.sqrt(2.0 * math.pi)

    def height(t):
        # F_n is constant between jumps
        return np.searchsorted(z, t, side="right") / n

    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        ts = np.linspace(a, b, points_per_interval + 1)
        width = (b - a) / points_per_interval
        g = np.abs(height((a + b) / 2.0) - special.ndtr(ts)) * psi(ts)
        j = int(np.argmax(g))
        best = max(best, float(g[j]))
        # one local refinement around the best grid cell
        lo_j, hi_j = ts[max(j - 1, 0)], ts[min(j + 1, len(ts) - 1)]
        if hi_j > lo_j:
            c = height((a + b) / 2.0)
            res = optimize.minimize_scalar(
                lambda t: -abs(c - special.ndtr(t)) * float(psi(t)),
                bounds=(lo_j, hi_j),
                method="bounded",
                options={"xatol": 1e-12},
            )
            best = max(best, float(-res.fun))
        phi_cell = max(float(_phi_density(a)), float(_phi_density(b)))
        if a < 0.0 < b:
            phi_cell = phi_max_global
        psi_cell = float(np.max(psi(ts)))
        tol = max(tol, (phi_cell * psi_cell + slope) * width)
    return ScanResult(best, tol)


def _phi_density(t):
    return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)


# --- step-function squared-difference integrals ----------------------------


def step_sq_integral(breaks, heights, weight) -> float:
    """``int_0^1 (H(u) - u)^2 psi(u) du`` for the right-continuous step
    function H with ``H(u) = heights[k]`` on ``[breaks[k], breaks[k+1])``,
    ``H = 0`` before the first break and ``H = 1`` after the last.

    Exact antiderivatives (vectorized) for the unit and 1/(u(1-u))
    weights; adaptive quadrature for anything else.  The terminal level
    must be 1 within 1e-9 (cumulative-weight rounding is snapped so the
    final piece of the AD form stays finite).
    """
    breaks = np.asarray(breaks, dtype=float)
    heights = np.array(heights, dtype=float)
    if heights.size and abs(heights[-1] - 1.0) > 1e-9:
        raise DomainError("step function must reach 1 at its last break")
    if heights.size:
        heights[-1] = 1.0
    edges = np.concatenate([[0.0], breaks, [1.0]])
    levels = np.concatenate([[0.0], heights])
    a, b, c = edges[:-1], edges[1:], levels
    wide = b > a
    a, b, c = a[wide], b[wide], c[wide]
    if isinstance(weight, UnitWeight):
        return float((((c - a) ** 3 - (c - b) ** 3) / 3.0).sum())
    if isinstance(weight, ADWeight):
        # (c-u)^2/(u(1-u)): the c=0 / c=1 pieces absorb the endpoint
        # singularities; any other piece touching 0 or 1 is truly infinite
        if np.any((a <= 0.0) & (c != 0.0)) or np.any((b >= 1.0) & (c != 1.0)):
            raise DegenerateTailError("breakpoint saturated to 0 or 1 under the AD weight")
        total = -(b - a).sum()
        m = c != 0.0
        total += (c[m] ** 2 * (np.log(b[m]) - np.log(a[m]))).sum()
        m = c != 1.0
        total -= ((1.0 - c[m]) ** 2 * (np.log1p(-b[m]) - np.log1p(-a[m]))).sum()
        return float(total)
    total = 0.0
    for aa, bb, cc in zip(a, b, c):
        val, _ = integrate.quad(lambda u: (cc - u) ** 2 * float(weight.on_u(u)), aa, bb, limit=100)
        total += val
    return float(total)


def weighted_cvm_statistic(sample: Sample, weight=UNIT) -> float:
    """``int [F_n(mean + sd*t) - Phi(t)]^2 psi(Phi(t)) dPhi(t)``.

    Computed through the u = Phi(t) substitution, where the studentized
    ECDF is a step function with breakpoints Phi(z_(i)) and the integral
    splits into closed-form pieces.
    """
    z = sample.standardized()
    v = special.ndtr(z)
    heights = np.arange(1, sample.n + 1) / sample.n
    return step_sq_integral(v, heights, weight)


# --- Shapiro-Wilk -----------------------------------------------------------


@lru_cache(maxsize=None)
def _sw_coefficients(n: int) -> np.ndarray:
    """Royston's polynomial approximation to the normalized expected normal
    order statistics (the published AS R94 coefficient construction)."""
    if not 3 <= n <= 5000:
        raise SampleSizeError(f"Shapiro-Wilk supports 3 <= n <= 5000, got {n}")
    m = special.ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    mm = float(m @ m)
    a = np.empty(n)
    if n == 3:
        a[:] = (-math.sqrt(0.5), 0.0, math.sqrt(0.5))
        a.flags.writeable = False
        return a
    c = m / math.sqrt(mm)
    u = 1.0 / math.sqrt(n)
    a_n = (
        c[-1]
        + 0.221157 * u
        - 0.147981 * u**2
        - 2.071190 * u**3
        + 4.434685 * u**4
        - 2.706056 * u**5
    )
    if n <= 5:
        phi = (mm - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n**2)
        a[1:-1] = m[1:-1] / math.sqrt(phi)
        a[-1], a[0] = a_n, -a_n
    else:
        a_n1 = (
            c[-2]
            + 0.042981 * u
            - 0.293762 * u**2
            - 1.752461 * u**3
            + 5.682633 * u**4
            - 3.582633 * u**5
        )
        phi = (mm - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
            1.0 - 2.0 * a_n**2 - 2.0 * a_n1**2
        )
        a[2:-2] = m[2:-2] / math.sqrt(phi)
        a[-1], a[0] = a_n, -a_n
        a[-2], a[1] = a_n1, -a_n1
    a.flags.writeable = False
    return a


def shapiro_wilk_w(sample: Sample) -> float:
    """The W statistic, W = (sum a_i x_(i))^2 / sum (x_i - mean)^2."""
    if sample.n < 3 or sample.n > 5000:
        raise SampleSizeError(f"Shapiro-Wilk supports 3 <= n <= 5000, got {sample.n}")
    z = sample.standardized()
    return float(_sw_core(z[None, :], sample.n)[0])


def shapiro_wilk_statistic(sample: Sample) -> float:
    """Harness orientation: 1 - W, so that large values reject."""
    return 1.0 - shapiro_wilk_w(sample)


# --- BHEP -------------------------------------------------------------------


def bhep_statistic(standardized, beta: float = 1.0) -> float:
    """Closed double-sum form of the weighted ECF distance.

    ``standardized`` must already be the studentized sample
    z_i = (x_i - mean)/sd; the statistic equals

        n^-1 sum_{j,k} e^{-b^2 (z_j - z_k)^2 / 2}
        - 2 (1+b^2)^{-1/2} sum_j e^{-b^2 z_j^2 / (2(1+b^2))}
        + n (1+2b^2)^{-1/2}.
    """
    if not (np.isfinite(beta) and beta > 0):
        raise DomainError(f"BHEP smoothing parameter must be > 0, got {beta}")
    z = np.asarray(standardized, dtype=float)
    if z.ndim != 1 or z.size < 1:
        raise DomainError("need a one-dimensional sample of size >= 1")
    return float(_bhep_core(z[None, :], beta)[0])


# ---------------------------------------------------------------------------
# vectorized scoring for the Monte Carlo harness
# ---------------------------------------------------------------------------


def score_matrix(tests: Sequence, x: np.ndarray, presorted: bool = False) -> dict:
    """Evaluate every test on an (N, n) matrix of replicate samples.

    Shared intermediates (sorted rows, studentized rows, normal
    probabilities) are computed once.  Rows with zero variance raise
    ``DegenerateSampleError``; the harness resamples those upstream.
    Returns ``{test.label: vector of N statistic values}``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DomainError("expected an (N, n) sample matrix")
    n = x.shape[1]
    xs = x if presorted else np.sort(x, axis=1)
    out = {}

    need_student = any(
        isinstance(t, (Lilliefors, WeightedCvM, ShapiroWilk, Bhep)) for t in tests
    )
    z = v = u = None
    if need_student:
        mean = xs.mean(axis=1)
        sd = xs.std(axis=1, ddof=1)
        if np.any(sd <= 0.0):
            raise DegenerateSampleError("zero-variance replicate in sample matrix")
        z = (xs - mean[:, None]) / sd[:, None]
    if any(isinstance(t, (Lilliefors, WeightedCvM)) for t in tests):
        v = special.ndtr(z)
    if any(isinstance(t, (KolmogorovSmirnov, CramerVonMises, AndersonDarling)) for t in tests):
        u = special.ndtr(xs)

    for t in tests:
        if n < t.min_n:
            raise SampleSizeError(f"{t.label} needs n >= {t.min_n}, got {n}")
        if isinstance(t, KolmogorovSmirnov):
            out[t.label] = _ks_core(u)
        elif isinstance(t, CramerVonMises):
            out[t.label] = _cvm_core(u)
        elif isinstance(t, AndersonDarling):
            out[t.label] = _ad_core(u)
        elif isinstance(t, Lilliefors):
            if isinstance(t.weight, UnitWeight):
                out[t.label] = _ks_core(v)
            else:
                out[t.label] = np.array(
                    [lilliefors_statistic(Sample.from_values(row), t.weight) for row in xs]
                )
        elif isinstance(t, WeightedCvM):
            if isinstance(t.weight, UnitWeight):
                out[t.label] = _cvm_core(v)
            elif isinstance(t.weight, ADWeight):
                out[t.label] = _ad_core(v)
            else:
                out[t.label] = np.array(
                    [weighted_cvm_statistic(Sample.from_values(row), t.weight) for row in xs]
                )
        elif isinstance(t, ShapiroWilk):
            out[t.label] = 1.0 - _sw_core(z, n)
        elif isinstance(t, Bhep):
            out[t.label] = _bhep_core(z, t.beta)
        else:
            raise DomainError(f"unknown test kind: {t!r}")
    return out


def evaluate_matrix(test, x: np.ndarray, presorted: bool = False) -> np.ndarray:
    """Single-test convenience wrapper around :func:`score_matrix`."""
    return score_matrix([test], x, presorted=presorted)[test.label]
