"""Exception hierarchy.

Everything raised on purpose by the package derives from :class:`LinkageError`
so callers (and the CLI) can map failures to exit codes.
"""


class LinkageError(Exception):
    """Base class for all package errors."""


class ConfigError(LinkageError, ValueError):
    """Invalid configuration or options."""


class InputError(LinkageError, ValueError):
    """Unreadable or inconsistent input data."""


class SizeLimitError(LinkageError, ValueError):
    """A size cap was exceeded (pattern space or tuple product)."""


class DimensionError(LinkageError, ValueError):
    """Partitions over different ground sets were combined."""


class InitializationError(LinkageError):
    """Starting values could not be generated."""


class DegeneratePatternError(LinkageError, FloatingPointError):
    """Every admissible class assigns zero probability to a pattern."""


class DegeneratePrevalenceError(LinkageError, FloatingPointError):
    """A class prevalence of one leaves no complement to compare against."""


class FitError(LinkageError, FloatingPointError):
    """EM produced no usable parameter estimate."""


class UndefinedWeightError(LinkageError, FloatingPointError):
    """Both sides of a log-likelihood ratio are zero."""


class ScoringError(LinkageError, KeyError):
    """Assignments and ground truth do not line up."""


class UndefinedMetricError(LinkageError, ZeroDivisionError):
    """A rate was requested over an empty scope."""


class SpecError(LinkageError, ValueError):
    """A population spec is internally inconsistent."""
