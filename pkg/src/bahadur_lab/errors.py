"""Exception hierarchy shared by all modules."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class UndefinedMomentsError(DomainError):
    """The distribution has no finite mean/variance (e.g. Cauchy)."""


class DegenerateSampleError(ValueError):
    """Sample has zero variance; studentized statistics are undefined."""


class DegenerateTailError(ValueError):
    """Null CDF saturated to 0 or 1 at an observation; log-weight statistics
    would silently corrupt the tails, so we refuse instead of clipping."""


class SampleSizeError(ValueError):
    """Sample size outside the supported range of a statistic."""


class InfeasibleError(RuntimeError):
    """Constraint set is empty over the support (dual diverges)."""


class MaxIterationsError(RuntimeError):
    """Iterative solver exhausted its budget."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NumericalFailureError(RuntimeError):
    """A quadrature or root find failed to reach its tolerance."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class MissingKeyError(ConfigError):
    """Required configuration key absent."""

    def __init__(self, key):
        super().__init__(f"missing required config key: {key!r}")
        self.key = key


class BadValueError(ConfigError):
    """Configuration key present but unusable (unknown key, wrong type,
    or out-of-range value)."""

    def __init__(self, key, detail):
        super().__init__(f"bad config value for {key!r}: {detail}")
        self.key = key
        self.detail = detail


class DataFormatError(ValueError):
    """Malformed input data file."""

    def __init__(self, path, line_no, detail):
        super().__init__(f"{path}: line {line_no}: {detail}")
        self.path = path
        self.line_no = line_no
