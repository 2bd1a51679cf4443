"""Batch driver: TOML experiment configs in, bit-stable CSV tables out.

Exit codes are a stable contract for scripting:
0 success, 2 config/usage error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys

try:
    import tomllib  # python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

import numpy as np
from scipy import special

from . import bahadur, montecarlo
from . import statistics as stats
from .distributions import (
    Beta,
    Cauchy,
    DoubleExponential,
    Exponential,
    Logistic,
    Normal,
    Uniform,
)
from .errors import (
    BadValueError,
    ConfigError,
    DataFormatError,
    DegenerateSampleError,
    DegenerateTailError,
    DomainError,
    InfeasibleError,
    MaxIterationsError,
    MissingKeyError,
    NumericalFailureError,
    SampleSizeError,
    UndefinedMomentsError,
)

SEED_ENV_VAR = "BAHADUR_LAB_SEED"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_NUMERICAL_ERRORS = (
    DomainError,
    UndefinedMomentsError,
    DegenerateSampleError,
    DegenerateTailError,
    SampleSizeError,
    InfeasibleError,
    MaxIterationsError,
    NumericalFailureError,
)


# ---------------------------------------------------------------------------
# config parsing (strict: unknown keys are errors)
# ---------------------------------------------------------------------------

_EXPERIMENT_KEYS = {"seed", "replications", "sample_sizes", "bhep_beta", "output_path"}

_FAMILY_PARAMS = {
    "exponential": (Exponential, {"rate": 1.0}),
    "double_exponential": (DoubleExponential, {"location": 0.0, "scale": 1.0}),
    "cauchy": (Cauchy, {"location": 0.0, "scale": 1.0}),
    "beta": (Beta, {"alpha": None, "beta": None}),
    "logistic": (Logistic, {"location": 0.0, "scale": 1.0}),
    "uniform": (Uniform, {"lo": 0.0, "hi": 1.0}),
    "normal": (Normal, {"mu": 0.0, "sigma": 1.0}),
}

_WEIGHTS = {"unit": stats.UNIT, "ad": stats.AD_WEIGHT}


def _reject_unknown(table, allowed, where):
    for key in table:
        if key not in allowed:
            raise BadValueError(f"{where}.{key}", "unknown key")


def _require(table, key, where):
    if key not in table:
        raise MissingKeyError(f"{where}.{key}")
    return table[key]


def _as_int(value, key):
    if isinstance(value, bool) or not isinstance(value, int):
        raise BadValueError(key, f"expected an integer, got {value!r}")
    return value


def _as_number(value, key):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BadValueError(key, f"expected a number, got {value!r}")
    return float(value)


def _parse_test(table, index, default_beta):
    where = f"tests[{index}]"
    _reject_unknown(table, {"kind", "psi", "beta"}, where)
    kind = str(_require(table, "kind", where)).lower()
    psi = table.get("psi")
    if psi is not None:
        psi = str(psi).lower()
        if psi not in _WEIGHTS:
            raise BadValueError(f"{where}.psi", f"unknown weight {psi!r}")
    if kind in ("lilliefors", "l"):
        if psi not in (None, "unit"):
            raise BadValueError(f"{where}.psi", "lilliefors needs a bounded weight; only 'unit' is configurable")
        return stats.Lilliefors(stats.UNIT)
    if kind in ("weighted_cvm", "cvm", "cm"):
        return stats.WeightedCvM(_WEIGHTS[psi or "unit"])
    if kind in ("ad", "anderson_darling"):
        if psi not in (None, "ad"):
            raise BadValueError(f"{where}.psi", "the AD test is weighted_cvm with psi='ad'")
        return stats.WeightedCvM(stats.AD_WEIGHT)
    if kind in ("shapiro_wilk", "sw"):
        return stats.ShapiroWilk()
    if kind == "bhep":
        beta = _as_number(table.get("beta", default_beta), f"{where}.beta")
        if beta <= 0:
            raise BadValueError(f"{where}.beta", "must be > 0")
        return stats.Bhep(beta)
    if kind == "ks_simple":
        return stats.KolmogorovSmirnov()
    if kind == "cvm_simple":
        return stats.CramerVonMises()
    if kind == "ad_simple":
        return stats.AndersonDarling()
    raise BadValueError(f"{where}.kind", f"unknown test kind {kind!r}")


def _parse_alternative(table, index):
    where = f"alternatives[{index}]"
    family = str(_require(table, "family", where)).lower()
    if family not in _FAMILY_PARAMS:
        raise BadValueError(f"{where}.family", f"unknown family {family!r}")
    cls, params = _FAMILY_PARAMS[family]
    _reject_unknown(table, {"family", *params}, where)
    kwargs = {}
    for name, default in params.items():
        if name in table:
            kwargs[name] = _as_number(table[name], f"{where}.{name}")
        elif default is None:
            raise MissingKeyError(f"{where}.{name}")
        else:
            kwargs[name] = default
    try:
        return cls(**kwargs)
    except DomainError as exc:
        raise BadValueError(where, str(exc)) from exc


def parse_config(path: str) -> montecarlo.ExperimentConfig:
    """Parse and validate an experiment declaration; unknown keys are errors."""
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise BadValueError("<toml>", str(exc)) from exc

    _reject_unknown(data, {"experiment", "tests", "alternatives"}, "config")
    if "experiment" not in data:
        raise MissingKeyError("experiment")
    exp = data["experiment"]
    _reject_unknown(exp, _EXPERIMENT_KEYS, "experiment")

    seed = _as_int(_require(exp, "seed", "experiment"), "experiment.seed")
    if not 0 <= seed < 1 << 64:
        raise BadValueError("experiment.seed", "must fit in 64 unsigned bits")
    replications = _as_int(_require(exp, "replications", "experiment"), "experiment.replications")
    if replications < 1:
        raise BadValueError("experiment.replications", "must be >= 1")
    sizes = _require(exp, "sample_sizes", "experiment")
    if not isinstance(sizes, list) or not sizes:
        raise BadValueError("experiment.sample_sizes", "must be a nonempty list of integers")
    sizes = tuple(_as_int(n, "experiment.sample_sizes") for n in sizes)
    if any(n < 3 for n in sizes):
        raise BadValueError("experiment.sample_sizes", "every n must be >= 3")
    bhep_beta = _as_number(exp.get("bhep_beta", 1.0), "experiment.bhep_beta")
    if bhep_beta <= 0:
        raise BadValueError("experiment.bhep_beta", "must be > 0")
    output_path = exp.get("output_path")
    if output_path is not None and not isinstance(output_path, str):
        raise BadValueError("experiment.output_path", "must be a string")

    raw_tests = data.get("tests")
    if not raw_tests:
        raise MissingKeyError("tests")
    tests = tuple(_parse_test(t, i, bhep_beta) for i, t in enumerate(raw_tests))
    labels = [t.label for t in tests]
    if len(set(labels)) != len(labels):
        raise BadValueError("tests", f"duplicate test labels: {labels}")

    raw_alts = data.get("alternatives")
    if not raw_alts:
        raise MissingKeyError("alternatives")
    alternatives = tuple(_parse_alternative(t, i) for i, t in enumerate(raw_alts))
    alt_labels = [a.label for a in alternatives]
    if len(set(alt_labels)) != len(alt_labels):
        raise BadValueError("alternatives", f"duplicate alternatives: {alt_labels}")

    return montecarlo.ExperimentConfig(
        seed=seed,
        replications=replications,
        sample_sizes=sizes,
        tests=tests,
        alternatives=alternatives,
        bhep_beta=bhep_beta,
        output_path=output_path,
    )


def _test_to_toml(test) -> list:
    if isinstance(test, stats.Lilliefors):
        return ['kind = "lilliefors"']
    if isinstance(test, stats.WeightedCvM):
        psi = "ad" if isinstance(test.weight, stats.ADWeight) else "unit"
        return ['kind = "weighted_cvm"', f'psi = "{psi}"']
    if isinstance(test, stats.ShapiroWilk):
        return ['kind = "shapiro_wilk"']
    if isinstance(test, stats.Bhep):
        return ['kind = "bhep"', f"beta = {test.beta!r}"]
    if isinstance(test, stats.KolmogorovSmirnov):
        return ['kind = "ks_simple"']
    if isinstance(test, stats.CramerVonMises):
        return ['kind = "cvm_simple"']
    if isinstance(test, stats.AndersonDarling):
        return ['kind = "ad_simple"']
    raise BadValueError("tests", f"cannot render {test!r}")


def _alternative_to_toml(alt) -> list:
    for family, (cls, params) in _FAMILY_PARAMS.items():
        if type(alt) is cls:
            lines = [f'family = "{family}"']
            lines += [f"{name} = {getattr(alt, name)!r}" for name in params]
            return lines
    raise BadValueError("alternatives", f"cannot render {alt!r}")


def render_config(config: montecarlo.ExperimentConfig) -> str:
    """TOML echo of a config; ``parse_config`` of the result round-trips."""
    lines = [
        "[experiment]",
        f"seed = {config.seed}",
        f"replications = {config.replications}",
        f"sample_sizes = [{', '.join(str(n) for n in config.sample_sizes)}]",
        f"bhep_beta = {config.bhep_beta!r}",
    ]
    if config.output_path is not None:
        lines.append(f'output_path = "{config.output_path}"')
    for test in config.tests:
        lines += ["", "[[tests]]", *_test_to_toml(test)]
    for alt in config.alternatives:
        lines += ["", "[[alternatives]]", *_alternative_to_toml(alt)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


def emit_table(cells, path: str, *, seed: int, replications: int) -> None:
    """CSV with 9-significant-digit numbers, rows sorted by
    (alternative, n, test); identical cells yield byte-identical files."""
    if not cells:
        raise DomainError("refusing to write an empty table")
    rows = sorted(cells, key=lambda c: (c.alternative.label, c.n, c.test.label))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["alternative", "n", "test", "mean_pvalue", "std_error", "seed", "N"])
        for c in rows:
            writer.writerow(
                [
                    c.alternative.label,
                    c.n,
                    c.test.label,
                    f"{c.estimate:.9g}",
                    f"{c.std_error:.9g}",
                    seed,
                    replications,
                ]
            )


def read_data_file(path: str) -> np.ndarray:
    """One real per line; blank lines are ignored, anything else is an error."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            text = raw.strip()
            if not text:
                continue
            try:
                values.append(float(text))
            except ValueError as exc:
                raise DataFormatError(path, line_no, f"not a number: {text!r}") from exc
    if len(values) < 3:
        raise DataFormatError(path, len(values), "need at least 3 observations")
    return np.asarray(values)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

_SLOPE_ALTERNATIVES = {
    "exponential": Exponential(1.0),
    "double_exponential": DoubleExponential(0.0, 1.0),
    "cauchy": Cauchy(0.0, 1.0),
    "beta21": Beta(2.0, 1.0),
    "beta33": Beta(3.0, 3.0),
    "logistic": Logistic(0.0, 1.0),
    "uniform": Uniform(0.0, 1.0),
    "normal": Normal(0.0, 1.0),
}


def _cmd_simulate(args) -> int:
    config = parse_config(args.config)
    seed = config.seed
    if os.environ.get(SEED_ENV_VAR):
        try:
            seed = int(os.environ[SEED_ENV_VAR])
        except ValueError as exc:
            raise BadValueError(SEED_ENV_VAR, "must be an integer") from exc
    if args.seed is not None:
        seed = args.seed
    if seed != config.seed:
        config = dataclasses.replace(config, seed=seed)
    out = args.out or config.output_path
    if not out:
        raise BadValueError("output_path", "give --out or set experiment.output_path")

    result = montecarlo.run_experiment(config, threads=args.threads)
    for failure in result.failures:
        print(
            f"cell failed: alt={failure.alternative_label} n={failure.n} "
            f"test={failure.test_label}: {failure.reason}",
            file=sys.stderr,
        )
    if not result.cells:
        print("no cell produced an estimate", file=sys.stderr)
        return EXIT_NUMERICAL
    emit_table(result.cells, out, seed=config.seed, replications=config.replications)
    print(f"wrote {len(result.cells)} cells to {out}")
    return EXIT_OK


def _grid_from_args(args) -> bahadur.GridParams:
    kwargs = {}
    if args.test in ("cm", "ad"):
        # the integral-type bound root-finds a tilt per cell; keep the
        # default search grid small enough for interactive use
        kwargs.update(
            t_count=21,
            a_values=(-1.0, -0.5, 0.0, 0.5, 1.0),
            b_values=(0.5, 1.0, 1.5, 2.0, 3.0),
            matched_points=False,
        )
    if args.grid_t is not None:
        kwargs["t_count"] = args.grid_t
    if args.grid_a is not None:
        kwargs["a_values"] = tuple(float(x) for x in args.grid_a.split(","))
    if args.grid_b is not None:
        kwargs["b_values"] = tuple(float(x) for x in args.grid_b.split(","))
    if args.no_moment_constraints:
        kwargs["constrain_moments"] = False
    return bahadur.GridParams(**kwargs)


def _cmd_slope(args) -> int:
    spec = _SLOPE_ALTERNATIVES[args.alt]
    weight = _WEIGHTS[args.psi]
    grid = _grid_from_args(args)
    reference = bahadur.normal_reference(args.ref_atoms) if args.ref_atoms else None
    if args.test == "ks":
        a, b = spec.support()
        brk = [x for x in (a, b) if np.isfinite(x)]
        est = bahadur.ks_slope(spec.cdf, special.ndtr, breakpoints=brk)
    elif args.test == "lilliefors":
        est = bahadur.lilliefors_slope_bound(spec, weight, grid=grid, reference=reference)
    elif args.test in ("cm", "ad"):
        w = stats.AD_WEIGHT if args.test == "ad" else weight
        est = bahadur.ad_slope_bound(spec, w, grid=grid, reference=reference)
    else:  # pragma: no cover - argparse restricts choices
        raise BadValueError("test", args.test)
    print(f"alternative  = {spec.label}")
    print(f"test         = {args.test}")
    print(f"discrepancy  = {est.discrepancy:.9g}")
    print(f"exponent     = {est.exponent:.9g}")
    print(f"slope        = {est.slope:.9g}")
    print(f"kind         = {est.kind}")
    return EXIT_OK


_STAT_KINDS = {
    "lilliefors": stats.Lilliefors(stats.UNIT),
    "cm": stats.WeightedCvM(stats.UNIT),
    "ad": stats.WeightedCvM(stats.AD_WEIGHT),
    "sw": stats.ShapiroWilk(),
    "ks_simple": stats.KolmogorovSmirnov(),
    "cvm_simple": stats.CramerVonMises(),
    "ad_simple": stats.AndersonDarling(),
}


def _cmd_stat(args) -> int:
    data = read_data_file(args.data)
    if args.test == "bhep":
        sample = stats.Sample.from_values(data)
        value = stats.bhep_statistic(sample.standardized(), beta=args.beta)
        label = stats.Bhep(args.beta).label
    else:
        kind = _STAT_KINDS[args.test]
        value = float(stats.evaluate_matrix(kind, data[None, :])[0])
        label = kind.label
    print(f"{label} = {value:.9g}  (large values reject normality)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bahadur-lab",
        description="Normality-test simulation tables and Bahadur slope bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a mean p-value experiment from a TOML config")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", help="output CSV path (overrides experiment.output_path)")
    p_sim.add_argument("--threads", type=int, default=1, help="worker threads (never changes output bytes)")
    p_sim.add_argument("--seed", type=int, help=f"seed override (flag > ${SEED_ENV_VAR} > config)")
    p_sim.set_defaults(func=_cmd_simulate)

    p_slope = sub.add_parser("slope", help="discrepancy and slope (bound) for an alternative")
    p_slope.add_argument("--alt", required=True, choices=sorted(_SLOPE_ALTERNATIVES))
    p_slope.add_argument("--test", required=True, choices=["ks", "lilliefors", "cm", "ad"])
    p_slope.add_argument("--psi", choices=["unit", "ad"], default="unit")
    p_slope.add_argument("--grid-t", type=int, help="t grid point count")
    p_slope.add_argument("--grid-a", help="comma-separated mean-constraint values")
    p_slope.add_argument("--grid-b", help="comma-separated second-moment-constraint values")
    p_slope.add_argument("--no-moment-constraints", action="store_true")
    p_slope.add_argument("--ref-atoms", type=int, help="reference discretization size (default 2001)")
    p_slope.set_defaults(func=_cmd_slope)

    p_stat = sub.add_parser("stat", help="score a data file with one statistic")
    p_stat.add_argument("--test", required=True, choices=[*sorted(_STAT_KINDS), "bhep"])
    p_stat.add_argument("--data", required=True)
    p_stat.add_argument("--beta", type=float, default=1.0, help="BHEP smoothing parameter")
    p_stat.set_defaults(func=_cmd_stat)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
