"""Exception types shared across the package."""


class PpbellError(Exception):
    """Base class for all package errors."""


class ConfigError(PpbellError):
    """Invalid configuration value or combination (CLI exit code 2)."""


class NonFiniteError(PpbellError):
    """A phase-space coordinate is NaN or infinite."""


class SamplingError(PpbellError):
    """The rejection sampler failed to accept within its iteration cap."""


class UnstableDenominatorError(PpbellError):
    """A ratio denominator mean is not resolved from zero (mean <= 5 x SE).

    Raised for the CH denominator and for the post-selection norm
    (CLI exit code 3).
    """


class ImagResidualError(PpbellError):
    """A reported statistic has an imaginary residual beyond 3 x its SE.

    Quasi-observable means must be real up to sampling noise; a large
    imaginary part signals a broken estimator or ensemble (CLI exit code 3).
    """


class TruncationError(PpbellError):
    """Fock-space truncation tail exceeds the requested tolerance."""
