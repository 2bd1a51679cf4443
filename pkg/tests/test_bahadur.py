import math

import numpy as np
import pytest
from scipy import integrate, special

from bahadur_lab import (
    Cauchy,
    DiscreteMeasure,
    Exponential,
    GridParams,
    Normal,
    PiecewiseLinearWeight,
    SlopeEstimate,
    UNIT,
    AD_WEIGHT,
    Uniform,
    ad_discrepancy,
    ad_slope_bound,
    gad_upper_bound,
    gli_upper_bound,
    ks_rate_G,
    ks_slope,
    lilliefors_discrepancy,
    lilliefors_slope_bound,
    mean_value,
    min_kl_tilt,
    normal_reference,
    orlicz_gauge_indicator,
    second_moment,
    sup_discrepancy_simple,
    tail_mass,
)
from bahadur_lab.bahadur import Constraint, _transformed_sq_integral
from bahadur_lab.errors import (
    DomainError,
    InfeasibleError,
    UndefinedMomentsError,
)

from oracles import bernoulli_kl, dense_rate_scan, orlicz_gauge_bisect

FLAT2 = PiecewiseLinearWeight(knots=(-1.0, 1.0), heights=(2.0, 2.0), domain="t")
FLAT2_U = PiecewiseLinearWeight(knots=(0.25, 0.75), heights=(2.0, 2.0), domain="u")


class TestRateFunction:
    def test_zero(self):
        assert ks_rate_G(0.0) == 0.0

    def test_known_value_half(self):
        assert ks_rate_G(0.5) == pytest.approx(0.5323, abs=1e-4)
        assert ks_rate_G(0.5) == pytest.approx(dense_rate_scan(0.5), abs=1e-8)

    def test_quadratic_lower_bound(self):
        # Pinsker: the Bernoulli KL dominates twice the squared gap
        for a in np.linspace(0.01, 0.95, 40):
            assert ks_rate_G(float(a)) >= 2.0 * a * a - 1e-12

    def test_dense_scan_agreement(self):
        rng = np.random.default_rng(101)
        for a in rng.uniform(0.02, 0.9, size=5):
            assert ks_rate_G(float(a)) == pytest.approx(dense_rate_scan(float(a)), abs=1e-8)

    def test_monotone(self):
        grid = np.linspace(0.0, 0.99, 50)
        vals = [ks_rate_G(float(a)) for a in grid]
        assert np.all(np.diff(vals) >= -1e-12)

    def test_true_divergence_toward_one(self):
        # the rate grows like -ln(1-a): slowly, but without bound
        assert ks_rate_G(1.0 - 1e-9) > 20.0
        assert ks_rate_G(1.0 - 1e-9) == pytest.approx(-math.log(1e-9), abs=1e-6)

    def test_boundary_and_domain(self):
        assert ks_rate_G(1.0) == math.inf
        with pytest.raises(DomainError):
            ks_rate_G(-0.1)
        with pytest.raises(DomainError):
            ks_rate_G(1.1)


class TestSupDiscrepancy:
    def test_identical_cdfs(self):
        assert sup_discrepancy_simple(special.ndtr, special.ndtr) <= 1e-15

    def test_uniform_vs_normal(self):
        # the sup is |0 - Phi(0)| = 1/2 at the lower support edge
        u = Uniform(0.0, 1.0)
        assert sup_discrepancy_simple(u.cdf, special.ndtr, breakpoints=(0.0, 1.0)) == pytest.approx(
            0.5, abs=1e-8
        )

    def test_shifted_normal_closed_form(self):
        f = Normal(0.1, 1.0)
        expected = 2.0 * special.ndtr(0.05) - 1.0
        assert sup_discrepancy_simple(f.cdf, special.ndtr) == pytest.approx(expected, abs=1e-8)


class TestKsSlope:
    def test_null_slope_zero(self):
        est = ks_slope(special.ndtr, special.ndtr)
        assert est.exponent == 0.0 and est.slope == 0.0 and est.kind == "exact"

    def test_uniform_composition(self):
        u = Uniform(0.0, 1.0)
        est = ks_slope(u.cdf, special.ndtr, breakpoints=(0.0, 1.0))
        assert est.discrepancy == pytest.approx(0.5, abs=1e-8)
        assert est.exponent == pytest.approx(ks_rate_G(est.discrepancy), abs=1e-12)
        assert est.slope == 2.0 * est.exponent

    def test_monotone_in_discrepancy(self):
        assert ks_rate_G(0.3) <= ks_rate_G(0.4) <= ks_rate_G(0.5)

    def test_total_discrepancy_gives_infinite_slope(self):
        step0 = lambda t: (np.asarray(t) >= 0.0).astype(float)
        step1 = lambda t: (np.asarray(t) >= 1.0).astype(float)
        est = ks_slope(step0, step1, breakpoints=(0.0, 0.5, 1.0))
        assert est.discrepancy == 1.0
        assert est.exponent == math.inf and est.slope == math.inf

    def test_slope_invariant_enforced(self):
        with pytest.raises(DomainError):
            SlopeEstimate(0.1, 0.2, 0.5, "exact")
        est = SlopeEstimate.from_exponent(0.1, 0.2, "upper_bound")
        assert est.slope == 0.4


class TestLillieforsDiscrepancy:
    def test_normal_is_exactly_matched(self):
        assert lilliefors_discrepancy(Normal(3.0, 2.5)) <= 1e-12

    def test_uniform_stationary_value(self):
        got = lilliefors_discrepancy(Uniform(0.0, 1.0))
        # stationary points where phi(t) = 1/sqrt(12)
        t = math.sqrt(math.log(12.0 / (2.0 * math.pi)))
        expected = special.ndtr(t) - (0.5 + t / math.sqrt(12.0))
        assert got == pytest.approx(expected, abs=1e-8)

    def test_uniform_against_dense_grid(self):
        got = lilliefors_discrepancy(Uniform(0.0, 1.0))
        t = np.linspace(-10, 10, 1_000_001)
        dense = np.max(np.abs(np.clip(0.5 + t / math.sqrt(12.0), 0, 1) - special.ndtr(t)))
        assert got == pytest.approx(dense, abs=1e-6)

    def test_positive_homogeneity_in_weight(self):
        base = lilliefors_discrepancy(Uniform(0.0, 1.0), UNIT)
        doubled = lilliefors_discrepancy(Uniform(0.0, 1.0), FLAT2)
        assert doubled == pytest.approx(2.0 * base, rel=1e-12)

    def test_cauchy_rejected(self):
        with pytest.raises(UndefinedMomentsError):
            lilliefors_discrepancy(Cauchy(0.0, 1.0))


class TestAdDiscrepancy:
    def test_normal_zero(self):
        assert ad_discrepancy(Normal(-1.0, 0.5)) <= 1e-13

    def test_uniform_riemann_oracle(self):
        got = ad_discrepancy(Uniform(0.0, 1.0))
        t = np.linspace(-12, 12, 1_000_001)
        f = (np.clip(0.5 + t / math.sqrt(12.0), 0, 1) - special.ndtr(t)) ** 2
        riemann = integrate.trapezoid(f * np.exp(-0.5 * t * t) / math.sqrt(2 * math.pi), t)
        assert got == pytest.approx(riemann, abs=1e-8)
        assert got == pytest.approx(0.0015250028784, abs=1e-10)  # regression fixture

    def test_linearity_in_weight(self):
        base = ad_discrepancy(Uniform(0.0, 1.0), UNIT)
        doubled = ad_discrepancy(Uniform(0.0, 1.0), FLAT2_U)
        assert doubled == pytest.approx(2.0 * base, rel=1e-9)

    def test_ad_weight_finite_for_exponential(self):
        v = ad_discrepancy(Exponential(1.0), AD_WEIGHT)
        assert 0.0 < v < 1.0

    def test_cauchy_rejected(self):
        with pytest.raises(UndefinedMomentsError):
            ad_discrepancy(Cauchy(0.0, 1.0), UNIT)


class TestNormalReference:
    def test_is_probability_measure(self):
        ref = normal_reference()
        assert ref.weights.sum() == pytest.approx(1.0, abs=1e-15)
        assert np.all(ref.weights > 0)
        assert abs(float(ref.weights @ ref.support)) <= 1e-12
        assert float(ref.weights @ ref.support**2) == pytest.approx(1.0, abs=1e-4)

    def test_validation(self):
        with pytest.raises(DomainError):
            DiscreteMeasure(np.array([0.0, 0.0]), np.array([0.5, 0.5]))
        with pytest.raises(DomainError):
            DiscreteMeasure(np.array([0.0, 1.0]), np.array([0.6, 0.6]))


class TestMinKlTilt:
    def test_no_constraints(self):
        ref = normal_reference(201)
        res = min_kl_tilt(ref, [])
        assert res.kl == 0.0
        assert res.minimizer is ref

    def test_two_atom_bernoulli_closed_form(self):
        ref = DiscreteMeasure(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
        res = min_kl_tilt(ref, [tail_mass(-1.0, 0.9)])
        expected = 0.9 * math.log(1.8) + 0.1 * math.log(0.2)
        # reported kl is the relative entropy of the returned measure, whose
        # constraint residual is ~1e-12; first-order effect stays below 1e-10
        assert res.kl == pytest.approx(expected, abs=1e-10)
        assert expected == pytest.approx(0.36807, abs=1e-5)
        assert res.minimizer.weights[0] == pytest.approx(0.9, abs=1e-9)

    def test_grid_tail_mass_matches_bernoulli(self):
        ref = normal_reference()
        pa = ref.mass_at_most(0.0)
        res = min_kl_tilt(ref, [tail_mass(0.0, 0.9)])
        assert res.kl == pytest.approx(bernoulli_kl(0.9, pa), abs=1e-10)

    def test_gaussian_mean_tilt(self):
        res = min_kl_tilt(normal_reference(), [mean_value(1.0)])
        assert res.kl == pytest.approx(0.5, abs=1e-4)
        assert float(res.minimizer.weights @ res.minimizer.support) == pytest.approx(1.0, abs=1e-9)

    def test_kkt_residuals(self):
        ref = normal_reference()
        res = min_kl_tilt(ref, [tail_mass(-0.5, 0.4), mean_value(0.3), second_moment(1.5)])
        q = res.minimizer
        assert q.mass_at_most(-0.5) == pytest.approx(0.4, abs=1e-9)
        assert float(q.weights @ q.support) == pytest.approx(0.3, abs=1e-9)
        assert float(q.weights @ q.support**2) == pytest.approx(1.5, abs=1e-9)

    def test_active_inequality(self):
        ref = normal_reference()
        res = min_kl_tilt(ref, [mean_value(0.7, relation=">=")])
        assert float(res.minimizer.weights @ res.minimizer.support) == pytest.approx(0.7, abs=1e-9)
        assert res.multipliers[0] > 0.0
        assert res.kl == pytest.approx(0.7**2 / 2.0, abs=1e-3)

    def test_inactive_inequality_slackness(self):
        ref = normal_reference()
        res = min_kl_tilt(ref, [mean_value(-2.0, relation=">=")])
        assert res.kl == 0.0
        assert res.multipliers[0] == 0.0  # complementary slackness: inactive => zero

    def test_mixed_active_inactive(self):
        ref = normal_reference()
        res = min_kl_tilt(
            ref, [mean_value(0.5, relation=">="), second_moment(0.5, relation=">=")]
        )
        mean = float(res.minimizer.weights @ res.minimizer.support)
        m2 = float(res.minimizer.weights @ res.minimizer.support**2)
        assert mean == pytest.approx(0.5, abs=1e-9)
        assert m2 >= 0.5
        slack = m2 - 0.5
        assert abs(res.multipliers[1] * slack) <= 1e-8

    def test_infeasible_out_of_range(self):
        ref = normal_reference()
        with pytest.raises(InfeasibleError):
            min_kl_tilt(ref, [mean_value(10.0)])
        with pytest.raises(InfeasibleError):
            min_kl_tilt(ref, [tail_mass(-9.0, 0.5)])

    def test_infeasible_by_divergence(self):
        # attainable range is open: pushing the tail mass this hard needs
        # multipliers beyond the divergence bound
        ref = normal_reference()
        with pytest.raises(InfeasibleError):
            min_kl_tilt(ref, [tail_mass(-7.5, 1.0 - 1e-12)])

    def test_conflicting_constraints_infeasible(self):
        ref = normal_reference()
        with pytest.raises(InfeasibleError):
            min_kl_tilt(ref, [tail_mass(0.0, 1.0 - 1e-9), mean_value(1.4), second_moment(2.1)])

    def test_custom_constraint_function(self):
        ref = normal_reference()
        res = min_kl_tilt(ref, [Constraint(lambda z: np.abs(z), "=", 1.2, "E|X|")])
        got = float(res.minimizer.weights @ np.abs(res.minimizer.support))
        assert got == pytest.approx(1.2, abs=1e-9)


def _solved_measures():
    """A few tilted minimizers used for the gauge-inequality properties."""
    ref = normal_reference(801)
    problems = [
        [mean_value(0.8)],
        [tail_mass(-1.0, 0.3)],
        [tail_mass(0.5, 0.5), mean_value(-0.2)],
        [mean_value(0.4), second_moment(1.8)],
        [tail_mass(1.2, 0.8), second_moment(1.2)],
    ]
    return ref, [(min_kl_tilt(ref, cons), cons) for cons in problems]


class TestGaugeInequalities:
    def test_indicator_bound_on_random_subsets(self):
        # |Q(A)| <= (KL + 1 + sqrt(2)) * gauge(reference mass of A)
        ref, solved = _solved_measures()
        rng = np.random.default_rng(55)
        checked = 0
        for res, _ in solved:
            for _ in range(20):
                mask = rng.uniform(size=ref.support.size) < rng.uniform(0.05, 0.9)
                p = float(ref.weights[mask].sum())
                if p <= 0.0:
                    continue
                qa = float(res.minimizer.weights[mask].sum())
                bound = (res.kl + 1.0 + math.sqrt(2.0)) * orlicz_gauge_indicator(p)
                assert qa <= bound + 1e-12
                checked += 1
        assert checked >= 100

    def test_cdf_modulus(self):
        # window masses of the minimizer CDF obey the same gauge bound
        ref, solved = _solved_measures()
        rng = np.random.default_rng(56)
        mid = 0.5 * (ref.support[:-1] + ref.support[1:])
        cum_ref = np.concatenate([[0.0], ref.cumulative])
        for res, _ in solved:
            cum_q = np.concatenate([[0.0], res.minimizer.cumulative])
            for _ in range(30):
                i, j = sorted(rng.integers(0, mid.size, size=2))
                if i == j:
                    continue
                # s, t at cell boundaries: the reference mass of (s, t] is a
                # sum of whole cells, i.e. the normal mass of the window
                p = float(cum_ref[j + 1] - cum_ref[i + 1])
                dq = float(cum_q[j + 1] - cum_q[i + 1])
                if p <= 0:
                    continue
                bound = (res.kl + 1.0 + math.sqrt(2.0)) * orlicz_gauge_indicator(p)
                assert dq <= bound + 1e-12


PINNED = GridParams.pinned(0.0, 1.0, constrain_moments=False)
SMALL = GridParams(
    t_count=13,
    a_values=(-0.5, 0.0, 0.5),
    b_values=(0.5, 1.0, 2.0),
    matched_points=False,
)


class TestGliUpperBound:
    def test_zero_level(self):
        assert gli_upper_bound(0.0) == 0.0

    def test_matches_rate_function_when_pinned(self):
        b = gli_upper_bound(0.1, grid=PINNED)
        assert b == pytest.approx(ks_rate_G(0.1), abs=1e-3)

    def test_monotone_in_level(self):
        vals = [gli_upper_bound(u, grid=SMALL) for u in (0.05, 0.1, 0.2)]
        assert vals[0] <= vals[1] + 1e-9 and vals[1] <= vals[2] + 1e-9

    def test_refinement_never_increases(self):
        base = gli_upper_bound(0.12, grid=SMALL)
        fine = gli_upper_bound(0.12, grid=SMALL.refined())
        assert fine <= base + 1e-9

    def test_moment_constraints_only_raise_the_bound(self):
        free = gli_upper_bound(0.1, grid=GridParams.pinned(0.0, 1.0, constrain_moments=False, matched_points=False))
        pinned = gli_upper_bound(0.1, grid=GridParams.pinned(0.0, 1.0, constrain_moments=True, matched_points=False))
        assert pinned >= free - 1e-9

    def test_infeasible_level(self):
        with pytest.raises(InfeasibleError):
            gli_upper_bound(1.2, grid=PINNED)

    def test_domain(self):
        with pytest.raises(DomainError):
            gli_upper_bound(-0.1)


class TestGadUpperBound:
    def test_zero_level(self):
        assert gad_upper_bound(0.0) == 0.0

    def test_monotone_in_level(self):
        grid = GridParams.pinned(0.0, 1.0, constrain_moments=False, matched_points=False, t_count=13)
        lo = gad_upper_bound(0.005, grid=grid)
        hi = gad_upper_bound(0.02, grid=grid)
        assert lo <= hi + 1e-9

    def test_single_bump_cells_dominate_gli_cells(self):
        # for matched cells, reaching the integral induced by the sup-cell
        # minimizer can only need a smaller bump, hence no larger entropy
        ref = normal_reference(801)
        h = 0.08
        cells = [(-1.0, 1), (0.0, 1), (0.7, -1), (1.4, 1), (-0.4, -1)]
        moments = [(0.0, 1.0), (0.2, 1.5)]
        for a, b in moments:
            c = math.sqrt(b - a * a)
            for t, s in cells:
                v = float(special.ndtr(t)) + s * h
                tau = a + c * t
                res = min_kl_tilt(ref, [tail_mass(tau, v), mean_value(a), second_moment(b)])
                induced = _transformed_sq_integral(res.minimizer, a, b, UNIT)
                cell_grid = GridParams(
                    t_span=(t, t), t_count=1, a_values=(a,), b_values=(b,), matched_points=False
                )
                bound = gad_upper_bound(induced, grid=cell_grid, reference=ref)
                # slack covers the 1-d root-find tolerance on the bump size
                assert bound <= res.kl + 1e-6

    def test_infeasible_level(self):
        with pytest.raises(InfeasibleError):
            gad_upper_bound(5.0, grid=GridParams.pinned(0.0, 1.0, t_count=5, matched_points=False))


class TestStepIntegralOnMeasures:
    def test_cumsum_rounding_stays_finite(self):
        # cumulative weights may end at 1 - O(eps); the terminal level must
        # be snapped so the AD form does not blow up on the last piece
        from bahadur_lab.statistics import step_sq_integral

        cum = np.array([1.0 / 3.0, 2.0 / 3.0, 1.0 - 1e-12])
        val = step_sq_integral(np.array([0.2, 0.5, 0.9]), cum, AD_WEIGHT)
        exact = step_sq_integral(np.array([0.2, 0.5, 0.9]), np.array([1 / 3, 2 / 3, 1.0]), AD_WEIGHT)
        assert np.isfinite(val) and val == pytest.approx(exact, rel=1e-9)

    def test_end_level_contract(self):
        from bahadur_lab.statistics import step_sq_integral

        with pytest.raises(DomainError):
            step_sq_integral(np.array([0.5]), np.array([0.5]), UNIT)


class TestSlopeBounds:
    def test_lilliefors_bound_composes(self):
        grid = GridParams.pinned(0.0, 1.0, constrain_moments=False, matched_points=False, t_count=31)
        est = lilliefors_slope_bound(Uniform(0.0, 1.0), UNIT, grid=grid, reference=normal_reference(801))
        assert est.kind == "upper_bound"
        assert est.discrepancy == pytest.approx(0.0572067, abs=1e-5)
        assert est.slope == 2.0 * est.exponent > 0

    def test_normal_alternative_is_free(self):
        est = lilliefors_slope_bound(Normal(1.0, 2.0))
        assert est.discrepancy <= 1e-12 and est.slope == 0.0

    def test_ad_bound_with_ad_weight(self):
        grid = GridParams.pinned(0.0, 1.0, constrain_moments=False, matched_points=False, t_count=9)
        ref = normal_reference(801)
        est = ad_slope_bound(Uniform(0.0, 1.0), AD_WEIGHT, grid=grid, reference=ref)
        assert est.kind == "upper_bound"
        assert est.exponent > 0 and np.isfinite(est.exponent)


class TestOrliczGauge:
    def test_full_mass_value(self):
        got = orlicz_gauge_indicator(1.0)
        assert got == pytest.approx(0.87245, abs=1e-5)
        assert got == pytest.approx(orlicz_gauge_bisect(1.0), abs=1e-10)

    def test_bisection_oracle_random(self):
        for p in (0.9, 0.5, 0.1, 0.01, 1e-4):
            assert orlicz_gauge_indicator(p) == pytest.approx(orlicz_gauge_bisect(p), abs=1e-10)

    def test_vanishes_as_p_to_zero(self):
        assert orlicz_gauge_indicator(1e-12) < 0.04

    def test_strictly_monotone(self):
        ps = np.geomspace(1e-8, 1.0, 40)
        vals = [orlicz_gauge_indicator(float(p)) for p in ps]
        assert np.all(np.diff(vals) > 0)

    def test_domain(self):
        for bad in (0.0, -0.5, 1.5):
            with pytest.raises(DomainError):
                orlicz_gauge_indicator(bad)
