"""Slope machinery: exact KS rate function, discrepancy functionals, a
constrained relative-entropy minimizer over discrete measures, and the
exponential-Orlicz gauge of indicator functions.

The p-value of a consistent test decays exponentially under a fixed
alternative; the decay exponent is a large-deviation rate evaluated at the
population discrepancy of the alternative.  For the plain KS statistic the
rate is the one-dimensional Bernoulli form

    G(a) = inf_{0 < t <= 1-a} KL(Bernoulli(a+t) || Bernoulli(t)),

which is computed exactly here.  For the studentized sup and integral
statistics the rate is an infimum of relative entropy over an
infinite-dimensional constraint set; we compute certified *upper* bounds
by exhibiting feasible discrete measures: every exponential tilt of a
discretized normal reference that satisfies the defining constraint has
relative entropy at least the infimum.  Grid search over tilts
(tail-mass point constraints crossed with mean/second-moment constraints)
gives the bounds ``gli_upper_bound`` / ``gad_upper_bound``; refining the
search grids (nested) can only lower them.

Functionals not representable as measures could only lower the true
infimum further, which is consistent with reporting upper bounds; no lower
bounds are attempted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .distributions import AlternativeSpec, alt_moments
from .errors import (
    DegenerateTailError,
    DomainError,
    InfeasibleError,
    MaxIterationsError,
    NumericalFailureError,
)
from .statistics import ADWeight, UNIT, step_sq_integral

__all__ = [
    "DiscreteMeasure",
    "normal_reference",
    "Constraint",
    "tail_mass",
    "mean_value",
    "second_moment",
    "TiltResult",
    "min_kl_tilt",
    "ks_rate_G",
    "sup_discrepancy_simple",
    "SlopeEstimate",
    "ks_slope",
    "lilliefors_discrepancy",
    "ad_discrepancy",
    "GridParams",
    "gli_upper_bound",
    "gad_upper_bound",
    "lilliefors_slope_bound",
    "ad_slope_bound",
    "orlicz_gauge_indicator",
]


# ---------------------------------------------------------------------------
# discrete measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Grid support with nonnegative weights summing to one.

    The numerical stand-in for the functionals entering the variational
    rate: on probability measures the Fenchel conjugate of the log moment
    generating functional reduces to relative entropy against the
    reference.
    """

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if s.ndim != 1 or s.shape != w.shape or s.size == 0:
            raise DomainError("support and weights must be matching 1-d arrays")
        if np.any(np.diff(s) <= 0):
            raise DomainError("support must be strictly increasing")
        if np.any(w < 0) or not np.isfinite(w).all():
            raise DomainError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights must sum to 1 (got {w.sum()!r})")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "weights", w)

    @cached_property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.weights)

    def cdf(self, t):
        """Right-continuous CDF of the measure."""
        idx = np.searchsorted(self.support, t, side="right")
        cum = np.concatenate([[0.0], self.cumulative])
        return cum[idx]

    def mass_at_most(self, tau: float) -> float:
        return float(self.cdf(tau))


def _interval_normal_mass(a, b):
    # Phi(b) - Phi(a) without cancellation in the upper tail
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.where(a >= 0.0, special.ndtr(-a) - special.ndtr(-b), special.ndtr(b) - special.ndtr(a))


def normal_reference(m: int = 2001, lo: float = -8.0, hi: float = 8.0) -> DiscreteMeasure:
    """Discretization of the standard normal on an evenly spaced grid.

    Atom weights are the exact normal masses of the midpoint cells (the two
    end cells absorb the tails), renormalized to sum to one.  At the
    default m=2001 on [-8, 8] the mean-tilt relative entropy reproduces the
    Gaussian closed form mu^2/2 to a few 1e-6.
    """
    if m < 3:
        raise DomainError("need at least 3 atoms")
    if not lo < hi:
        raise DomainError("need lo < hi")
    z = np.linspace(lo, hi, m)
    mid = 0.5 * (z[:-1] + z[1:])
    edges_lo = np.concatenate([[-np.inf], mid])
    edges_hi = np.concatenate([mid, [np.inf]])
    p = _interval_normal_mass(edges_lo, edges_hi)
    return DiscreteMeasure(z, p / p.sum())


@lru_cache(maxsize=4)
def _default_reference(m=2001, lo=-8.0, hi=8.0) -> DiscreteMeasure:
    return normal_reference(m, lo, hi)


# ---------------------------------------------------------------------------
# constrained relative-entropy minimization (exponential tilting dual)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constraint:
    """Affine constraint ``sum_i q_i g(z_i) (= or >=) bound`` on the weights."""

    fn: Callable
    relation: str
    bound: float
    label: str = ""

    def __post_init__(self):
        if self.relation not in ("=", ">="):
            raise DomainError("relation must be '=' or '>='")


def tail_mass(tau: float, value: float, relation: str = "=") -> Constraint:
    return Constraint(lambda z: (z <= tau).astype(float), relation, value, f"P(X<={tau:g})")


def mean_value(a: float, relation: str = "=") -> Constraint:
    return Constraint(lambda z: z, relation, a, "E[X]")


def second_moment(b: float, relation: str = "=") -> Constraint:
    return Constraint(lambda z: z * z, relation, b, "E[X^2]")


@dataclass(frozen=True)
class TiltResult:
    kl: float
    minimizer: DiscreteMeasure
    multipliers: tuple
    iterations: int


def _dual_value(logp, g_mat, targets, theta):
    w = logp + g_mat @ theta
    m = w.max()
    lse = m + math.log(np.exp(w - m).sum())
    return float(theta @ targets - lse), w, lse


def _newton_tilt(logp, g_mat, targets, theta0, bound, max_iter, tol):
    """Damped Newton ascent on the tilt dual; returns (theta, q, iterations)."""
    theta = np.array(theta0, dtype=float)
    d_val, w, lse = _dual_value(logp, g_mat, targets, theta)
    for it in range(1, max_iter + 1):
        q = np.exp(w - lse)
        grad = targets - g_mat.T @ q
        if np.abs(grad).max() <= tol:
            return theta, q, it
        gq = g_mat.T @ q
        hess = (g_mat * q[:, None]).T @ g_mat - np.outer(gq, gq)
        ridge = 1e-13 * max(np.abs(np.diag(hess)).max(), 1.0)
        try:
            step = np.linalg.solve(hess + ridge * np.eye(len(theta)), grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        scale = 1.0
        accepted = False
        for _ in range(60):
            cand = theta + scale * step
            d_cand, w_cand, lse_cand = _dual_value(logp, g_mat, targets, cand)
            if d_cand > d_val:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            # the dual is flat to machine precision here; an undamped Newton
            # step still contracts the KKT residual quadratically
            cand = theta + step
            d_cand, w_cand, lse_cand = _dual_value(logp, g_mat, targets, cand)
            q_cand = np.exp(w_cand - lse_cand)
            grad_cand = targets - g_mat.T @ q_cand
            if np.abs(grad_cand).max() < np.abs(grad).max():
                accepted = True
            elif np.abs(grad).max() <= 1e-9:
                return theta, q, it
            else:
                raise MaxIterationsError(
                    "tilt dual stalled before reaching tolerance",
                    {"grad_inf": float(np.abs(grad).max()), "iterations": it},
                )
        theta, d_val, w, lse = cand, d_cand, w_cand, lse_cand
        if np.abs(theta).max() > bound:
            raise InfeasibleError(
                f"dual multipliers exceeded {bound}; constraint set is (numerically) empty"
            )
    raise MaxIterationsError(
        f"no convergence in {max_iter} Newton iterations",
        {"grad_inf": float(np.abs(grad).max()), "iterations": max_iter},
    )


def min_kl_tilt(
    reference: DiscreteMeasure,
    constraints: Sequence[Constraint],
    *,
    tol: float = 1e-11,
    max_iter: int = 200,
    multiplier_bound: float = 50.0,
    initial: Optional[Sequence[float]] = None,
) -> TiltResult:
    """Minimize ``sum q_i ln(q_i/p_i)`` subject to affine constraints.

    The minimizer is the exponential tilt q ~ p * exp(sum_j theta_j g_j)
    whose multipliers solve the concave dual by damped Newton iteration
    (step halving, divergence declared once ``|theta| > multiplier_bound``).
    Inequality constraints are handled by an active-set loop with the usual
    KKT sign/slackness conditions.
    """
    constraints = list(constraints)
    if not constraints:
        return TiltResult(0.0, reference, (), 0)

    pos = reference.weights > 0.0
    z = reference.support[pos]
    p = reference.weights[pos]
    logp = np.log(p)
    cols = [np.asarray(c.fn(z), dtype=float) for c in constraints]
    targets = np.array([c.bound for c in constraints])

    keep = []
    for j, (c, g) in enumerate(zip(constraints, cols)):
        gmin, gmax = float(g.min()), float(g.max())
        if c.relation == "=":
            if gmin == gmax:
                if gmin == c.bound:
                    continue  # vacuous
                raise InfeasibleError(f"constraint {c.label or j} fixed at {gmin}, needs {c.bound}")
            if not gmin < c.bound < gmax:
                raise InfeasibleError(
                    f"constraint {c.label or j}: bound {c.bound} outside attainable range ({gmin}, {gmax})"
                )
        else:
            if c.bound > gmax:
                raise InfeasibleError(
                    f"constraint {c.label or j}: bound {c.bound} exceeds attainable maximum {gmax}"
                )
            if c.bound <= gmin:
                continue  # always satisfied
        keep.append(j)

    if not keep:
        return TiltResult(0.0, reference, tuple(0.0 for _ in constraints), 0)

    g_all = np.column_stack([cols[j] for j in keep])
    t_all = targets[keep]
    is_eq = np.array([constraints[j].relation == "=" for j in keep])

    theta0_all = np.zeros(len(keep))
    if initial is not None and len(initial) == len(constraints):
        theta0_all = np.array([initial[j] for j in keep], dtype=float)

    active = np.ones(len(keep), dtype=bool)
    iterations = 0
    for _ in range(2 * len(keep) + 3):
        idx = np.flatnonzero(active)
        if idx.size:
            theta_a, q, it = _newton_tilt(
                logp, g_all[:, idx], t_all[idx], theta0_all[idx], multiplier_bound, max_iter, tol
            )
            iterations += it
            theta0_all[idx] = theta_a
        else:
            q = p.copy()
        theta0_all[~active] = 0.0
        # drop inequality constraints with wrong multiplier sign
        ineq_active = idx[~is_eq[idx]]
        lam = {j: theta0_all[j] for j in ineq_active}
        wrong = [j for j, v in lam.items() if v < -1e-10]
        if wrong:
            worst = min(wrong, key=lambda j: lam[j])
            active[worst] = False
            theta0_all[worst] = 0.0
            continue
        # re-activate violated inactive inequalities
        inactive = np.flatnonzero(~active)
        violated = [
            j for j in inactive if (g_all[:, j] @ q) < t_all[j] - 1e-9
        ]
        if violated:
            worst = max(violated, key=lambda j: t_all[j] - g_all[:, j] @ q)
            active[worst] = True
            continue
        break
    else:
        raise MaxIterationsError("active-set loop failed to settle", {"iterations": iterations})

    w = logp + g_all[:, np.flatnonzero(active)] @ theta0_all[np.flatnonzero(active)]
    m = w.max()
    lse = m + math.log(np.exp(w - m).sum())
    q = np.exp(w - lse)
    kl = float(max((w - logp) @ q - lse, 0.0))

    q_full = np.zeros_like(reference.weights)
    q_full[pos] = q / q.sum()
    multipliers = [0.0] * len(constraints)
    for slot, j in enumerate(keep):
        multipliers[j] = float(theta0_all[slot]) if active[slot] else 0.0
    return TiltResult(kl, DiscreteMeasure(reference.support, q_full), tuple(multipliers), iterations)


# ---------------------------------------------------------------------------
# exact KS rate function
# ---------------------------------------------------------------------------


def _bernoulli_kl_shift(a, t):
    # KL(Bernoulli(a+t) || Bernoulli(t)), the Eq.-level integrand of G
    return special.rel_entr(a + t, t) + special.rel_entr(1.0 - a - t, 1.0 - t)


def ks_rate_G(a: float) -> float:
    """Exact large-deviation rate of the KS statistic at discrepancy ``a``.

    Bisection on the stationarity condition, with the boundary value
    -ln(1-a) and a dense scan as fallbacks; absolute error <= 1e-10.
    """
    if not np.isfinite(a) or not 0.0 <= a <= 1.0:
        raise DomainError(f"discrepancy must lie in [0, 1], got {a}")
    if a == 0.0:
        return 0.0
    if a == 1.0:
        return math.inf

    span = 1.0 - a
    candidates = [-math.log1p(-a)]  # boundary t = 1-a

    def fprime(t):
        return np.log((a + t) * (1.0 - t) / (t * (1.0 - a - t))) - a / (t * (1.0 - t))

    grid = span * np.concatenate(
        [np.geomspace(1e-18, 0.5, 200), np.linspace(0.5, 1.0 - 1e-12, 200)]
    )
    vals = fprime(grid)
    sign_change = np.flatnonzero(np.sign(vals[:-1]) < np.sign(vals[1:]))
    if sign_change.size:
        j = sign_change[0]
        root = optimize.brentq(fprime, grid[j], grid[j + 1], xtol=1e-15, rtol=8.9e-16)
        candidates.append(float(_bernoulli_kl_shift(a, root)))
    # dense-scan fallback guards against a missed bracket
    scan = np.linspace(span * 1e-12, span, 20001)
    candidates.append(float(_bernoulli_kl_shift(a, scan).min()))
    return min(candidates)


# ---------------------------------------------------------------------------
# discrepancy functionals
# ---------------------------------------------------------------------------


def _scan_max(fn, lo, hi, breakpoints=(), grid=4001, top=12, xatol=1e-12):
    """Maximize a nonnegative piecewise-smooth function by coarse grid plus
    local bounded refinement around the leading candidates."""
    pts = np.linspace(lo, hi, grid)
    if len(breakpoints):
        extra = np.asarray(breakpoints, dtype=float)
        extra = extra[(extra >= lo) & (extra <= hi)]
        pts = np.unique(np.concatenate([pts, extra]))
    vals = np.asarray(fn(pts), dtype=float)
    best = float(vals.max())
    order = np.argsort(vals)[::-1][:top]
    for j in order:
        a = pts[max(j - 1, 0)]
        b = pts[min(j + 1, len(pts) - 1)]
        if b <= a:
            continue
        res = optimize.minimize_scalar(
            lambda t: -float(fn(np.array([t]))[0]),
            bounds=(a, b),
            method="bounded",
            options={"xatol": xatol},
        )
        best = max(best, float(-res.fun))
    return best


def _expand_range(f_lo_mass, f_hi_mass, lo=-8.0, hi=8.0, tail=1e-10, cap=1e9):
    while f_lo_mass(lo) > tail and lo > -cap:
        lo *= 2.0
    while f_hi_mass(hi) > tail and hi < cap:
        hi *= 2.0
    return lo, hi


def sup_discrepancy_simple(F: Callable, F0: Callable, breakpoints=()) -> float:
    """sup_t |F(t) - F0(t)| for two CDFs, to roughly 1e-8.

    The scan range expands until both CDFs put less than 1e-10 of mass
    outside it; pass known kink locations through ``breakpoints`` so they
    are evaluated exactly.
    """

    def diff(t):
        return np.abs(np.asarray(F(t), dtype=float) - np.asarray(F0(t), dtype=float))

    lo, hi = _expand_range(
        lambda t: max(float(F(t)), float(F0(t))),
        lambda t: max(1.0 - float(F(t)), 1.0 - float(F0(t))),
    )
    return _scan_max(diff, lo, hi, breakpoints=breakpoints)


@dataclass(frozen=True)
class SlopeEstimate:
    """A discrepancy, the p-value decay exponent at that discrepancy, and
    the slope (exactly twice the exponent).  ``kind`` records whether the
    exponent is exact or a certified upper bound."""

    discrepancy: float
    exponent: float
    slope: float
    kind: str

    def __post_init__(self):
        if self.kind not in ("exact", "upper_bound"):
            raise DomainError("kind must be 'exact' or 'upper_bound'")
        if self.discrepancy < 0 or self.exponent < 0:
            raise DomainError("discrepancy and exponent must be nonnegative")
        if self.slope != 2.0 * self.exponent:
            raise DomainError("slope must equal 2 * exponent")

    @classmethod
    def from_exponent(cls, discrepancy, exponent, kind) -> "SlopeEstimate":
        return cls(float(discrepancy), float(exponent), 2.0 * float(exponent), kind)


def ks_slope(F: Callable, F0: Callable, breakpoints=()) -> SlopeEstimate:
    """Exact KS slope against a continuous null: exponent = G(sup |F - F0|)."""
    d = min(sup_discrepancy_simple(F, F0, breakpoints=breakpoints), 1.0)
    return SlopeEstimate.from_exponent(d, ks_rate_G(d), "exact")


def _standardized_cdf(spec: AlternativeSpec):
    mu, sd = alt_moments(spec)

    def cdf(t):
        return np.asarray(spec.cdf(mu + sd * np.asarray(t, dtype=float)), dtype=float)

    a, b = spec.support()
    brk = [(x - mu) / sd for x in (a, b) if np.isfinite(x)]
    return cdf, brk


def lilliefors_discrepancy(spec: AlternativeSpec, weight=UNIT) -> float:
    """sup_t |F(mu + sd t) - Phi(t)| psi(t) for a bounded psi (tolerance 1e-8)."""
    if not getattr(weight, "bounded", False):
        raise DomainError("sup-type discrepancy needs a bounded weight")
    cdf, brk = _standardized_cdf(spec)

    def g(t):
        t = np.asarray(t, dtype=float)
        return np.abs(cdf(t) - special.ndtr(t)) * weight.on_t(t)

    wmax = weight.bound()
    lo, hi = _expand_range(
        lambda t: wmax * max(float(cdf(np.array([t]))[0]), float(special.ndtr(t))),
        lambda t: wmax * max(1.0 - float(cdf(np.array([t]))[0]), float(special.ndtr(-t))),
    )
    return _scan_max(g, lo, hi, breakpoints=brk)


def ad_discrepancy(spec: AlternativeSpec, weight=UNIT) -> float:
    """``int [F(mu + sd t) - Phi(t)]^2 psi(Phi(t)) dPhi(t)`` by adaptive
    quadrature (absolute tolerance 1e-10).

    Integration is truncated at |t| = 37, where the contribution is below
    1e-300 for bounded weights and below 1e-30 for the 1/(u(1-u)) weight
    on the exponentially-tailed or bounded-support families handled here.
    """
    cdf, brk = _standardized_cdf(spec)
    is_ad = isinstance(weight, ADWeight)

    def integrand(t):
        u = special.ndtr(t)
        sf = special.ndtr(-t)  # 1 - u without cancellation
        if u == 0.0 or sf == 0.0:
            return 0.0
        psi = 1.0 / (u * sf) if is_ad else float(weight.on_u(np.array([u]))[0])
        d = float(cdf(np.array([t]))[0]) - u
        return d * d * psi * math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)

    cut = 37.0
    cuts = sorted({-cut, cut, *[float(b) for b in brk if -cut < b < cut]})
    total, err = 0.0, 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, e = integrate.quad(integrand, a, b, epsabs=1e-12, epsrel=1e-10, limit=200)
        total += val
        err += e
    if err > 1e-9:
        raise NumericalFailureError(f"quadrature error estimate {err:.2e} exceeds tolerance")
    return float(max(total, 0.0))


# ---------------------------------------------------------------------------
# variational upper bounds on the studentized rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridParams:
    """Search grids for the feasible-tilt bounds.

    ``a_values``/``b_values`` are the candidate mean/second-moment
    constraints; ``constrain_moments=False`` drops those constraints while
    still using (a, b) in the time transform.  ``matched_points=None``
    adds probability-matched t points (one per reference cell) only when a
    single moment cell is searched, where they sharpen the bound at
    negligible cost.
    """

    t_span: tuple = (-6.0, 6.0)
    t_count: int = 61
    a_values: tuple = (-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5)
    b_values: tuple = (0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0)
    constrain_moments: bool = True
    matched_points: Optional[bool] = None

    @classmethod
    def pinned(cls, a: float = 0.0, b: float = 1.0, **kw) -> "GridParams":
        return cls(a_values=(a,), b_values=(b,), **kw)

    def refined(self) -> "GridParams":
        """Nested refinement: double the t density and insert moment-grid
        midpoints, so every previous cell is still searched."""

        def densify(vals):
            vals = np.asarray(vals, dtype=float)
            mids = 0.5 * (vals[:-1] + vals[1:])
            return tuple(np.unique(np.concatenate([vals, mids])))

        return replace(
            self,
            t_count=2 * self.t_count - 1,
            a_values=densify(self.a_values) if len(self.a_values) > 1 else self.a_values,
            b_values=densify(self.b_values) if len(self.b_values) > 1 else self.b_values,
        )

    def _matched_enabled(self) -> bool:
        if self.matched_points is not None:
            return self.matched_points
        return len(self.a_values) * len(self.b_values) == 1

    def t_values(self, reference: DiscreteMeasure, a: float, b: float) -> np.ndarray:
        base = np.linspace(self.t_span[0], self.t_span[1], self.t_count)
        if not self._matched_enabled():
            return base
        c = math.sqrt(b - a * a)
        cum = reference.cumulative[:-1]
        ok = (cum > 1e-15) & (cum < 1.0 - 1e-15)
        t_match = special.ndtri(cum[ok])
        lo = (reference.support[:-1][ok] - a) / c
        hi = (reference.support[1:][ok] - a) / c
        t_match = np.minimum(np.maximum(t_match, lo), np.nextafter(hi, -np.inf))
        return np.unique(np.concatenate([base, t_match]))


def _moment_constraints(grid: GridParams, a: float, b: float):
    if grid.constrain_moments:
        return [mean_value(a), second_moment(b)]
    return []


def gli_upper_bound(
    u: float,
    weight=UNIT,
    grid: Optional[GridParams] = None,
    reference: Optional[DiscreteMeasure] = None,
) -> float:
    """Certified upper bound on the sup-statistic rate at level ``u``.

    For every grid cell (t, sign, a, b) the tilt problem pins the tail mass
    at tau = a + sqrt(b - a^2) t to Phi(t) +- u/psi(t) together with the
    moment constraints; any solution is feasible for the variational
    infimum, so its relative entropy dominates the rate.  The minimum over
    cells is returned; all-infeasible grids raise ``InfeasibleError``.
    """
    if not np.isfinite(u) or u < 0:
        raise DomainError(f"level must be a nonnegative real, got {u}")
    if u == 0.0:
        return 0.0
    ref = reference if reference is not None else _default_reference()
    grid = grid if grid is not None else GridParams()
    zmin, zmax = ref.support[0], ref.support[-1]
    best = math.inf
    feasible = False
    for a in grid.a_values:
        for b in grid.b_values:
            if b - a * a <= 1e-12:
                continue
            c = math.sqrt(b - a * a)
            mcons = _moment_constraints(grid, a, b)
            warm = {1: None, -1: None}
            for t in grid.t_values(ref, a, b):
                psi_t = float(weight.on_t(np.array([t]))[0])
                if psi_t <= 0.0:
                    continue
                tau = a + c * t
                if tau < zmin or tau >= zmax:
                    continue
                phit = float(special.ndtr(t))
                for s in (1, -1):
                    v = phit + s * u / psi_t
                    if not 1e-12 < v < 1.0 - 1e-12:
                        continue
                    cons = [tail_mass(tau, v), *mcons]
                    try:
                        res = min_kl_tilt(ref, cons, initial=warm[s])
                    except InfeasibleError:
                        continue
                    except MaxIterationsError:
                        try:
                            res = min_kl_tilt(ref, cons)
                        except (InfeasibleError, MaxIterationsError):
                            continue
                    warm[s] = res.multipliers
                    feasible = True
                    if res.kl < best:
                        best = res.kl
    if not feasible:
        raise InfeasibleError(f"no grid cell admits the sup constraint at u={u}")
    return best


def _transformed_sq_integral(measure: DiscreteMeasure, a: float, b: float, weight) -> float:
    """The integral-statistic functional of a discrete measure's CDF under
    the (a, b) standardization, via the u = Phi(t) substitution."""
    c = math.sqrt(b - a * a)
    breaks = special.ndtr((measure.support - a) / c)
    return step_sq_integral(breaks, measure.cumulative, weight)


def gad_upper_bound(
    u: float,
    weight=UNIT,
    grid: Optional[GridParams] = None,
    reference: Optional[DiscreteMeasure] = None,
) -> float:
    """Certified upper bound on the integral-statistic rate at level ``u``.

    Cells restrict to single-bump feasible deviations: for each
    (t, sign, a, b) the tail-mass perturbation delta at t is chosen
    minimally (1-d root find) so that the minimizer's induced integral
    reaches ``u``, making the minimizer feasible for the variational
    problem; its relative entropy is then an upper bound.
    """
    if not np.isfinite(u) or u < 0:
        raise DomainError(f"level must be a nonnegative real, got {u}")
    if u == 0.0:
        return 0.0
    ref = reference if reference is not None else _default_reference()
    grid = grid if grid is not None else GridParams()
    zmin, zmax = ref.support[0], ref.support[-1]
    best = math.inf
    feasible = False

    def induced(result):
        try:
            return _transformed_sq_integral(result.minimizer, a, b, weight)
        except DegenerateTailError:
            return math.inf

    for a in grid.a_values:
        for b in grid.b_values:
            if b - a * a <= 1e-12:
                continue
            c = math.sqrt(b - a * a)
            mcons = _moment_constraints(grid, a, b)
            base = min_kl_tilt(ref, mcons)
            if induced(base) >= u:
                feasible = True
                best = min(best, base.kl)
                continue
            for t in np.linspace(grid.t_span[0], grid.t_span[1], grid.t_count):
                tau = a + c * t
                if tau < zmin or tau >= zmax:
                    continue
                phit = float(special.ndtr(t))
                for s in (1, -1):
                    cache = {}

                    def solve_at(delta):
                        if delta in cache:
                            return cache[delta]
                        v = phit + s * delta
                        if not 1e-12 < v < 1.0 - 1e-12:
                            cache[delta] = None
                            return None
                        try:
                            res = min_kl_tilt(ref, [tail_mass(tau, v), *mcons])
                        except (InfeasibleError, MaxIterationsError):
                            cache[delta] = None
                            return None
                        cache[delta] = (res, induced(res))
                        return cache[delta]

                    d_hi = (1.0 - 1e-9 - phit) if s > 0 else (phit - 1e-9)
                    sol = None
                    while d_hi > 1e-9:
                        sol = solve_at(d_hi)
                        if sol is not None:
                            break
                        d_hi *= 0.7
                    if sol is None or sol[1] < u:
                        continue  # this cell cannot reach level u
                    res_hi, _ = sol

                    def gap(delta):
                        s_val = solve_at(delta)
                        return (s_val[1] - u) if s_val is not None else math.inf

                    try:
                        d_star = optimize.brentq(gap, 0.0, d_hi, xtol=1e-12, rtol=8.9e-16)
                    except ValueError:
                        d_star = d_hi
                    chosen = None
                    for bump in (0.0, 1e-12, 1e-10, 1e-8, 1e-6):
                        cand = min(d_star * (1.0 + bump) + bump * 1e-6, d_hi)
                        sol_c = solve_at(cand)
                        if sol_c is not None and sol_c[1] >= u:
                            chosen = sol_c
                            break
                    if chosen is None:
                        chosen = sol  # the known-feasible bracket endpoint
                    feasible = True
                    if chosen[0].kl < best:
                        best = chosen[0].kl
    if not feasible:
        raise InfeasibleError(f"no grid cell can push the integral to u={u}")
    return best


def lilliefors_slope_bound(
    spec: AlternativeSpec, weight=UNIT, grid=None, reference=None
) -> SlopeEstimate:
    """Upper-bound slope for the sup-type studentized test at ``spec``."""
    d = lilliefors_discrepancy(spec, weight)
    if d == 0.0:
        return SlopeEstimate.from_exponent(0.0, 0.0, "upper_bound")
    return SlopeEstimate.from_exponent(
        d, gli_upper_bound(d, weight, grid=grid, reference=reference), "upper_bound"
    )


def ad_slope_bound(
    spec: AlternativeSpec, weight=UNIT, grid=None, reference=None
) -> SlopeEstimate:
    """Upper-bound slope for the integral-type studentized test at ``spec``."""
    d = ad_discrepancy(spec, weight)
    if d == 0.0:
        return SlopeEstimate.from_exponent(0.0, 0.0, "upper_bound")
    return SlopeEstimate.from_exponent(
        d, gad_upper_bound(d, weight, grid=grid, reference=reference), "upper_bound"
    )


# ---------------------------------------------------------------------------
# Orlicz gauge of indicators
# ---------------------------------------------------------------------------


def orlicz_gauge_indicator(p: float) -> float:
    """Gauge norm of an indicator of a set with probability ``p`` under the
    Young function exp(|x|) - |x| - 1: the value alpha^{-1}(1 + 1/p) with
    alpha(x) = exp(1/x) - 1/x, inverted to 1e-12.
    """
    if not (np.isfinite(p) and 0.0 < p <= 1.0):
        raise DomainError(f"probability must lie in (0, 1], got {p}")
    c = 1.0 + 1.0 / p
    # solve e^y - y = c on y > 0; then the gauge is 1/y
    lo = math.log(c)
    hi = math.log(2.0 * c) + 1.0
    y = 0.5 * (lo + hi)
    for _ in range(200):
        f = math.exp(y) - y - c
        if f > 0:
            hi = y
        else:
            lo = y
        step = f / (math.exp(y) - 1.0)
        y_new = y - step
        if not lo < y_new < hi:
            y_new = 0.5 * (lo + hi)
        if abs(y_new - y) <= 1e-15 * max(1.0, abs(y)):
            y = y_new
            break
        y = y_new
    return 1.0 / y
