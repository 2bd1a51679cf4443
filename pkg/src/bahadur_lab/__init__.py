"""Normality-test statistics, mean p-value Monte Carlo comparisons, and
large-deviation (Bahadur) slope machinery."""

from .bahadur import (
    Constraint,
    DiscreteMeasure,
    GridParams,
    SlopeEstimate,
    TiltResult,
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
from .distributions import (
    AlternativeSpec,
    Beta,
    Cauchy,
    DoubleExponential,
    Exponential,
    Logistic,
    MomentSummary,
    Normal,
    Uniform,
    alt_cdf,
    alt_moments,
    sample,
    std_normal_cdf,
    std_normal_quantile,
    table_alternatives,
)
from .montecarlo import (
    ExperimentConfig,
    ExperimentResult,
    PValueCell,
    draw_samples,
    exceedance_count,
    mean_pvalue,
    mean_pvalue_with_stderr,
    run_experiment,
    simulate_statistics,
)
from .rng import RandomStream
from .statistics import (
    AD_WEIGHT,
    UNIT,
    ADWeight,
    AndersonDarling,
    Bhep,
    CramerVonMises,
    KolmogorovSmirnov,
    Lilliefors,
    PiecewiseLinearWeight,
    Sample,
    ShapiroWilk,
    UnitWeight,
    WeightedCvM,
    ad_statistic,
    ad_statistic_a2,
    bhep_statistic,
    cvm_statistic,
    ks_statistic,
    lilliefors_scan,
    lilliefors_statistic,
    shapiro_wilk_statistic,
    shapiro_wilk_w,
    weighted_cvm_statistic,
)

__version__ = "0.1.0"
